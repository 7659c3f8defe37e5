#pragma once

#include <string>
#include <vector>

#include "scotopic/sensor.hpp"

namespace scotopic {

// IDX image/label readers (big-endian magic 0x00000803 / 0x00000801).
// Pixels are scaled to [0,1] by dividing by 255.
std::vector<IntensityImage> load_idx(const std::string& images_path,
                                     const std::string& labels_path);

// Writers for the same format, used by the dataset generator.
void save_idx(const std::vector<IntensityImage>& images,
              const std::string& images_path, const std::string& labels_path);

}  // namespace scotopic
