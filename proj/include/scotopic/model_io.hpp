#pragma once

#include <string>
#include <vector>

#include "scotopic/classifier.hpp"

namespace scotopic {

// Versioned little-endian model container (byte layout in docs/model_format.md).
// Kinds: adapted network, plain network, ensemble of specialists.

std::string adapted_to_bytes(const AdaptedNetwork& net);
AdaptedNetwork adapted_from_bytes(const std::string& bytes);

std::string plain_to_bytes(const Network& net);
Network plain_from_bytes(const std::string& bytes);

std::string ensemble_to_bytes(const std::vector<Specialist>& members);
std::vector<Specialist> ensemble_from_bytes(const std::string& bytes);

void write_file(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);

// Peek at the container kind byte: 1 adapted, 2 plain, 3 ensemble.
int model_kind(const std::string& bytes);

}  // namespace scotopic
