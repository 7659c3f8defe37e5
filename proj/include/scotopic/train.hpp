#pragma once

#include <vector>

#include "scotopic/classifier.hpp"
#include "scotopic/sensor.hpp"

namespace scotopic {

struct TrainConfig {
  double learning_rate = 0.004;  // 0.001 for the unadapted baselines
  int batch_size = 100;
  int epochs = 20;
  double weight_decay = 1e-4;    // L2 on filters only
  int exposures_per_image = 4;   // PPP samples per training sequence
  double ppp_min = 0.22;
  double ppp_max = 220.0;        // also the reference (full-quality) exposure
  uint64_t seed = 1;

  void validate() const;
};

enum class ArchKind { Conv, Mlp };

// Desk-scale architectures. Conv: 5x5/8 maps, 2x2 pool, 5x5/16 maps, 2x2
// pool, dense 128, softmax K. Mlp: dense 64, softmax K.
Network build_network(ArchKind kind, int height, int width, int channels, int classes);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean NLL per sample
  std::vector<double> t0_trace;    // prior strength after each epoch (adapted only)
};

// Step-one posterior learning: minimizes the NLL of the true class under the
// adapted network over exposures drawn log-uniformly from [ppp_min, ppp_max],
// with fresh photon noise every epoch. mu is frozen to the training-set mean
// intensity mapped through pixel_rate; t0 is a learnable scalar starting at 1.
AdaptedNetwork train_posterior(const std::vector<IntensityImage>& data,
                               const TrainConfig& cfg, const NoiseConfig& noise,
                               ArchKind arch, TrainReport* report = nullptr);

// Rate baseline: the same protocol on time-normalized inputs N/PPP with a
// standard first layer.
Network train_rate(const std::vector<IntensityImage>& data, const TrainConfig& cfg,
                   const NoiseConfig& noise, ArchKind arch, TrainReport* report = nullptr);

// One independently trained specialist per anchor PPP, each seeing photon
// counts rendered only at its anchor.
std::vector<Specialist> train_ensemble(const std::vector<IntensityImage>& data,
                                       const std::vector<double>& anchors,
                                       const TrainConfig& cfg, const NoiseConfig& noise,
                                       ArchKind arch, TrainReport* report = nullptr);

// Per-pixel training-set mean intensity.
std::vector<double> mean_intensity(const std::vector<IntensityImage>& data);

// Single-sample NLL with parameter gradients accumulated into the model's
// grad buffers (and t0_grad when non-null). The training loop's inner step,
// exposed so gradients can be checked against finite differences.
double adapted_loss_grad(AdaptedNetwork& model, const CountImage& counts, double ppp,
                         int label, double* t0_grad);

}  // namespace scotopic
