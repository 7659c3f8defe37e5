#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scotopic/sprt.hpp"

namespace scotopic {

// Everything threshold learning needs from a classifier run: per example the
// max log ratio and the argmax-error indicator at each PPP grid point.
struct RiskDataset {
  std::vector<double> grid;                 // ascending PPP grid
  double bin_width = 1.0;                   // Delta for the literal eta*Delta cost
  std::vector<std::vector<double>> s_max;   // [example][grid]
  std::vector<std::vector<uint8_t>> err;    // [example][grid], 1 = wrong argmax

  size_t size() const { return s_max.size(); }
  void validate() const;
};

RiskDataset risk_dataset_from_trajectories(const std::vector<Trajectory>& trajectories,
                                           double bin_width);

// How photon-collection time is charged per grid step. PppIncrement charges
// eta * (ppp_k - ppp_{k-1}) so the summed cost equals eta * E[PPP]; Constant
// charges the literal eta * Delta per step.
enum class StepCost { PppIncrement, Constant };

struct AnnealConfig {
  double initial_temperature = 0.5;
  double decay = 0.99;
  double floor = 0.01;
  int iterations = 500;
  double smoothness_weight = 0.01;
  double step_size = 0.05;
  StepCost step_cost = StepCost::PppIncrement;

  void validate() const;
};

// Sigmoid-relaxed crossing indicator Sigm((S_max - tau) / sigma).
double soft_crossing(double s_max, double tau, double sigma);

// Relaxed Bayes risk: mean over examples of the backward recursion
// R_k = c_k + q_k e_k + (1 - q_k) R_{k+1}, with a forced decision at the last
// grid point. sigma -> 0 recovers the empirical stop-and-pay risk.
double bayes_risk(const RiskDataset& data, const ThresholdSchedule& schedule,
                  double eta, double sigma, StepCost cost = StepCost::PppIncrement);

// Hard-indicator risk by direct simulation of the stopping rule; the
// enumeration oracle the relaxation must agree with as sigma -> 0.
double hard_risk(const RiskDataset& data, const ThresholdSchedule& schedule,
                 double eta, StepCost cost = StepCost::PppIncrement);

// Exact gradient of the relaxed risk (plus the smoothness penalty
// w * sum_t (tau_t - tau_{t+1})^2) with respect to each schedule value, by
// reverse accumulation through the recursion. Schedule grid must equal the
// data grid.
std::vector<double> risk_gradient(const RiskDataset& data,
                                  const ThresholdSchedule& schedule, double eta,
                                  double sigma, double smoothness_weight,
                                  StepCost cost = StepCost::PppIncrement);

// Annealed gradient descent on the schedule; returns the iterate with the
// lowest hard risk seen (the initialization included, so the result is never
// worse than the starting schedule).
ThresholdSchedule optimize_schedule(const RiskDataset& data, double eta,
                                    const AnnealConfig& cfg,
                                    const ThresholdSchedule& init);

// Best constant threshold from a sweep of `n_candidates` values spanning the
// observed S range; the standard initialization for optimize_schedule.
ThresholdSchedule best_constant_schedule(const RiskDataset& data, double eta,
                                         int n_candidates = 50,
                                         StepCost cost = StepCost::PppIncrement);

std::string schedule_csv(const ThresholdSchedule& s, double eta,
                         const AnnealConfig& cfg, uint64_t seed);
ThresholdSchedule schedule_from_csv(const std::string& text);

}  // namespace scotopic
