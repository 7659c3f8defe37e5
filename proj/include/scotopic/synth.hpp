#pragma once

#include <cstdint>
#include <vector>

#include "scotopic/sensor.hpp"

namespace scotopic {

// Procedural 28x28 grayscale digit corpus: a 7x5 glyph font rendered with
// per-sample rotation, scale, shear, translation, stroke intensity and blur.
// Deterministic in the seed; used for desk-scale experiments when no IDX
// dataset is supplied.
std::vector<IntensityImage> synth_digits(int n, uint64_t seed);

}  // namespace scotopic
