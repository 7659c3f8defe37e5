#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scotopic {

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const std::string& bytes);

// Record of one experiment run: the resolved config, seeds, per-stage wall
// clock, and content hashes of every emitted artifact. Rerunning from the
// recorded config must reproduce the hashed bytes exactly.
struct ExperimentManifest {
  std::string library_version = "0.1.0";
  std::string command;
  std::string config_text;  // resolved config snapshot
  uint64_t seed = 0;

  struct Stage {
    std::string name;
    double seconds = 0.0;
  };
  std::vector<Stage> stages;

  struct Artifact {
    std::string path;
    std::string sha256;
  };
  std::vector<Artifact> artifacts;

  void add_stage(const std::string& name, double seconds);
  void add_artifact(const std::string& path, const std::string& bytes);

  std::string to_text() const;
  void save(const std::string& path) const;
};

}  // namespace scotopic
