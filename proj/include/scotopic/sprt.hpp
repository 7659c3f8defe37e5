#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scotopic/classifier.hpp"
#include "scotopic/sensor.hpp"

namespace scotopic {

// Time-varying decision threshold tau(t) on a PPP grid, interpolated
// piecewise-linearly in log-PPP and clamped at the ends. A single grid point
// represents a constant threshold.
struct ThresholdSchedule {
  std::vector<double> times;   // ascending PPP grid points
  std::vector<double> values;  // tau at each grid point
  double cost_of_time = 0.0;   // eta this schedule was tuned for (metadata)

  static ThresholdSchedule constant(double tau);
  double at(double ppp) const;
  void validate() const;
};

enum class StopReason { ThresholdCrossing, Cutoff };
enum class Regime { FreeResponse, Interrogation };

// Per-example record of one sequential decision.
struct DecisionTrace {
  std::vector<double> query_ppps;                         // queries actually made
  std::vector<std::vector<double>> log_ratio_trajectory;  // S_c at each query
  double stop_ppp = 0.0;
  int declared_class = -1;
  int true_class = -1;
  StopReason stopped_by = StopReason::Cutoff;
  Regime regime = Regime::FreeResponse;

  bool correct() const { return declared_class == true_class; }
};

// Wald-style bound: a decision taken at log posterior ratio tau has error
// probability at most 1 - Sigm(tau) = Sigm(-tau).
double error_bound(double tau);

// Log-spaced PPP query grid (default 50 points over [0.22, 220]).
std::vector<double> log_ppp_grid(double lo = 0.22, double hi = 220.0, int n = 50);

// Race to threshold: at each query PPP, accumulate the stream, apply readout
// corruption, evaluate the posterior, and stop the first time
// max_c S_c > tau(ppp). If no query crosses, the argmax at max_ppp is forced
// (cutoff). Query PPPs snap to the stream's bin resolution; duplicates after
// snapping collapse to one query.
DecisionTrace decide_fr(const PhotonStream& stream, const PosteriorModel& model,
                        const ThresholdSchedule& schedule,
                        const std::vector<double>& query_ppps, double max_ppp,
                        uint64_t readout_seed);

// Interrogation regime: one forward pass at a fixed PPP; argmax decides.
DecisionTrace decide_int(const PhotonStream& stream, const PosteriorModel& model,
                         double ppp, uint64_t readout_seed);

// Query PPPs snapped to the stream's bin resolution, deduplicated, with the
// cutoff bin appended; shared by the sequential deciders and the spiking
// runtime so that all of them see the same counts.
std::vector<int> snap_query_bins(const PhotonStream& stream,
                                 const std::vector<double>& query_ppps, double max_ppp);

// Per-query summary of one stream under a model: realized grid, max log
// ratio, and argmax-error indicator. This is the shared substrate for SAT
// sweeps and threshold learning (one pass serves every threshold).
struct Trajectory {
  std::vector<double> ppps;
  std::vector<double> s_max;
  std::vector<uint8_t> err;
};

Trajectory eval_trajectory(const PhotonStream& stream, const PosteriorModel& model,
                           const std::vector<double>& query_ppps, uint64_t readout_seed);

struct SatRow {
  Regime regime;
  double threshold_or_ppp;
  double median_ppp;
  double mean_ppp;
  double error_rate;
  double median_ppp_se;
  double error_se;
  int n_examples;
};

struct SatOptions {
  Regime regime = Regime::FreeResponse;
  std::vector<double> values;  // FR: constant thresholds; INT: fixed PPPs
  std::vector<double> grid = log_ppp_grid();
  double max_ppp = 220.0;
  int bootstrap = 1000;
  uint64_t stream_seed = 1;
  uint64_t readout_seed = 2;
  uint64_t bootstrap_seed = 3;
  int threads = 1;
};

// Speed-accuracy tradeoff table over a labeled dataset. FR: one row per
// constant threshold; INT: one row per fixed PPP. Standard errors are
// bootstrap over examples.
std::vector<SatRow> sat_sweep(const std::vector<IntensityImage>& dataset,
                              const PosteriorModel& model, const NoiseConfig& noise,
                              const SatOptions& opt);

std::string sat_csv_header();
std::string sat_csv_row(const SatRow& row);

}  // namespace scotopic
