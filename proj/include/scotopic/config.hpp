#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scotopic/risk.hpp"
#include "scotopic/sensor.hpp"
#include "scotopic/train.hpp"

namespace scotopic {

// Experiment configuration: one structured text file with named sections
// mirroring the parameter structs. Unknown sections or keys are errors;
// every key has a default so partial files stay short.
struct ExperimentConfig {
  struct Dataset {
    std::string train_images;  // empty = procedural digits
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    int synth_train = 10000;
    int synth_test = 2000;
    int train_subset = 0;  // 0 = all
    int test_subset = 0;
  } dataset;

  struct Model {
    std::string kind = "waldnet";  // waldnet | rate | photopic | ensemble |
                                   // waldnet-estimated-light
    std::string arch = "conv";     // conv | mlp
    std::vector<double> anchors = {0.22, 2.2, 22.0, 220.0};
    std::string model_path;      // input model for evaluation-stage commands
    std::string estimator_path;  // fitted light estimator (estimated-light runs)
  } model;

  NoiseConfig noise = make_default_noise();
  TrainConfig train;
  AnnealConfig anneal;

  struct Sprt {
    std::string regime = "FR";  // FR | INT
    double grid_min = 0.22;
    double grid_max = 220.0;
    int grid_points = 50;
    double max_ppp = 220.0;
    std::vector<double> thresholds = {-2, -1, 0, 1, 2, 3, 5, 8};
    std::vector<double> int_ppps = {0.22, 2.2, 22.0, 220.0};
    std::vector<double> etas = {0.001, 0.01};
    int bootstrap = 1000;
  } sprt;

  struct SweepNoise {
    std::string parameter = "read_noise_std";
    std::vector<double> values;
  } sweep_noise;

  struct Spiking {
    std::vector<double> tau_dis = {0.05, 0.1, 0.2, 0.4};
    double threshold = 2.2;
    int n_examples = 500;
  } spiking;

  struct Exposure {
    std::vector<double> illuminances = {1e-3, 1.0, 250.0, 1e3, 1e5};
    std::vector<double> times = {1.0 / 500, 1.0 / 128, 0.125, 1.0, 8.0, 60.0};
  } exposure;

  struct Light {
    std::vector<int> s_candidates = {1, 2, 3, 4, 5, 7};
    std::vector<int> k_candidates = {1, 3, 5, 10, 25};
    int train_per_anchor = 100;
  } light;

  struct Run {
    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
  } run;

  static NoiseConfig make_default_noise() {
    NoiseConfig n;
    n.bin_width = 0.22;  // streams resolve the lowest anchor PPP to one bin
    return n;
  }

  std::vector<double> query_grid() const;
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace scotopic
