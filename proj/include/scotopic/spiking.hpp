#pragma once

#include <cstdint>
#include <vector>

#include "scotopic/classifier.hpp"
#include "scotopic/sprt.hpp"

namespace scotopic {

// Multiplication tallies for the power proxy. Additions and comparisons are
// not counted, matching how the tradeoff is normalized.
struct PowerMeter {
  size_t spiking_mults = 0;
  size_t baseline_mults = 0;
  size_t spikes_total = 0;

  double mult_ratio() const {
    return baseline_mults == 0 ? 0.0
                               : static_cast<double>(spiking_mults) / baseline_mults;
  }
};

// Emit spikes from one unit's residual: subtract tau_dis per positive spike
// while residual > tau_dis, add while residual < -tau_dis. Returns the signed
// count; residual lands in (-tau_dis, tau_dis].
int emit_spikes(double& residual, double tau_dis);

// The adapted first layer as a recurrent membrane:
//   V(t) = r(t) V(t-1) + alpha(t) W X_t + l(t),
// with r(t) = alpha(t)/alpha(t-1) and l(t) = beta(t) - r(t) beta(t-1).
// Unrolled from V(0) = beta(0) this reproduces alpha(t) W N_t + beta(t)
// exactly, for unit bin steps or for collapsed multi-bin steps alike.
// Exposures are on the model clock (PPP units).
class MembraneLayer {
 public:
  explicit MembraneLayer(const AdaptedNetwork& net);

  const Tensor& potentials() const { return v_; }
  double last_time() const { return last_t_; }
  void reset();

  // Consecutive-bin update (t must equal last_time + 1).
  void membrane_step(const std::vector<double>& frame_counts, int t,
                     PowerMeter* meter = nullptr);
  // Update to an arbitrary later time with the aggregated counts of all
  // skipped bins; algebraically identical to stepping bin by bin.
  void advance(const std::vector<double>& delta_counts, double t,
               PowerMeter* meter = nullptr);

 private:
  const AdaptedNetwork* net_;
  Tensor v_;
  double last_t_ = 0.0;
  std::vector<double> coupling_;   // per-feature sum_i W_ij mu_i, fixed
  std::vector<double> beta_prev_;  // beta at last_t
};

// Positive/negative neuron pair per unit: transmits the source value in
// tau_dis quanta; downstream reconstructs base + tau_dis * cumulative count,
// which stays within tau_dis of the true value.
class SpikeBus {
 public:
  SpikeBus(std::vector<double> initial_values, double tau_dis);

  // Unit j moved to value a; returns the signed spikes emitted now.
  int update(size_t j, double a);
  double reconstructed(size_t j) const {
    return base_[j] + tau_ * static_cast<double>(cum_[j]);
  }
  double residual(size_t j) const { return value_[j] - reconstructed(j); }
  size_t size() const { return base_.size(); }
  size_t total_spikes() const { return total_; }

 private:
  double tau_;
  std::vector<double> base_;   // t = 0 values, known downstream at no cost
  std::vector<double> value_;  // current exact source values
  std::vector<long> cum_;      // cumulative signed spike counts
  size_t total_ = 0;
};

struct SpikingResult {
  DecisionTrace trace;
  PowerMeter power;
};

// Event-driven run: exact membrane first layer, spike-quantized propagation
// between layers, incremental pre-activation accumulators above, and the
// race-to-threshold applied to the reconstructed output log ratios at the
// query grid. The runtime refreshes once per query point, consuming the
// aggregated photon counts in between; readout corruption is not modeled
// (the continuous reference runs on the same raw counts).
SpikingResult run_stream_spiking(const PhotonStream& stream, const AdaptedNetwork& net,
                                 const ThresholdSchedule& schedule,
                                 const std::vector<double>& query_ppps, double max_ppp,
                                 double tau_dis);

// Dense reference: a full forward pass at every query point. Declares the
// same class as the adapted-forward + race pipeline; its multiplication count
// is the normalization denominator.
SpikingResult continuous_baseline(const PhotonStream& stream, const AdaptedNetwork& net,
                                  const ThresholdSchedule& schedule,
                                  const std::vector<double>& query_ppps, double max_ppp);

}  // namespace scotopic
