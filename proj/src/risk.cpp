#include "scotopic/risk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "scotopic/util.hpp"

namespace scotopic {

void RiskDataset::validate() const {
  if (grid.empty()) throw std::invalid_argument("risk: empty grid");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::invalid_argument("risk: grid must be strictly ascending");
  if (s_max.empty()) throw std::invalid_argument("risk: no examples");
  for (size_t n = 0; n < s_max.size(); ++n) {
    if (s_max[n].size() != grid.size() || err[n].size() != grid.size())
      throw std::invalid_argument("risk: ragged example rows");
    for (uint8_t e : err[n])
      if (e > 1) throw std::invalid_argument("risk: error indicators must be 0/1");
  }
}

RiskDataset risk_dataset_from_trajectories(const std::vector<Trajectory>& trajectories,
                                           double bin_width) {
  if (trajectories.empty()) throw std::invalid_argument("risk: no trajectories");
  RiskDataset d;
  d.grid = trajectories[0].ppps;
  d.bin_width = bin_width;
  for (const auto& tr : trajectories) {
    if (tr.ppps != d.grid)
      throw std::invalid_argument("risk: trajectories disagree on the grid");
    d.s_max.push_back(tr.s_max);
    d.err.push_back(std::vector<uint8_t>(tr.err.begin(), tr.err.end()));
  }
  d.validate();
  return d;
}

void AnnealConfig::validate() const {
  if (!(floor > 0.0) || !(floor <= initial_temperature))
    throw std::invalid_argument("anneal: need 0 < floor <= initial_temperature");
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("anneal: decay in (0,1)");
  if (iterations < 1) throw std::invalid_argument("anneal: iterations >= 1");
  if (smoothness_weight < 0.0) throw std::invalid_argument("anneal: negative smoothness");
  if (!(step_size > 0.0)) throw std::invalid_argument("anneal: step_size <= 0");
}

double soft_crossing(double s_max, double tau, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("soft_crossing: sigma must be positive");
  return 1.0 / (1.0 + std::exp(-(s_max - tau) / sigma));
}

namespace {

// Per-step photon cost; summed over steps up to the stop it equals
// eta * PPP_stop in PppIncrement mode.
double step_cost_at(const RiskDataset& d, size_t k, double eta, StepCost mode) {
  if (mode == StepCost::Constant) return eta * d.bin_width;
  return eta * (k == 0 ? d.grid[0] : d.grid[k] - d.grid[k - 1]);
}

std::vector<double> taus_on_grid(const RiskDataset& d, const ThresholdSchedule& s) {
  s.validate();
  if (s.values.size() != 1 && s.times != d.grid)
    throw std::invalid_argument("risk: schedule grid must match the data grid");
  std::vector<double> taus(d.grid.size());
  for (size_t k = 0; k < d.grid.size(); ++k)
    taus[k] = s.values.size() == 1 ? s.values[0] : s.values[k];
  return taus;
}

}  // namespace

double bayes_risk(const RiskDataset& data, const ThresholdSchedule& schedule,
                  double eta, double sigma, StepCost cost) {
  data.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("bayes_risk: sigma must be positive");
  const std::vector<double> taus = taus_on_grid(data, schedule);
  const size_t K = data.grid.size();
  double total = 0.0;
  for (size_t n = 0; n < data.size(); ++n) {
    double R = step_cost_at(data, K - 1, eta, cost) + data.err[n][K - 1];
    for (size_t k = K - 1; k-- > 0;) {
      const double q = soft_crossing(data.s_max[n][k], taus[k], sigma);
      R = step_cost_at(data, k, eta, cost) + q * data.err[n][k] + (1.0 - q) * R;
    }
    total += R;
  }
  return total / static_cast<double>(data.size());
}

double hard_risk(const RiskDataset& data, const ThresholdSchedule& schedule,
                 double eta, StepCost cost) {
  data.validate();
  const std::vector<double> taus = taus_on_grid(data, schedule);
  const size_t K = data.grid.size();
  double total = 0.0;
  for (size_t n = 0; n < data.size(); ++n) {
    double paid = 0.0;
    bool stopped = false;
    for (size_t k = 0; k < K; ++k) {
      paid += step_cost_at(data, k, eta, cost);
      const bool last = k + 1 == K;
      if (data.s_max[n][k] > taus[k] || last) {
        total += paid + data.err[n][k];
        stopped = true;
        break;
      }
    }
    (void)stopped;
  }
  return total / static_cast<double>(data.size());
}

std::vector<double> risk_gradient(const RiskDataset& data,
                                  const ThresholdSchedule& schedule, double eta,
                                  double sigma, double smoothness_weight,
                                  StepCost cost) {
  data.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("risk_gradient: sigma must be positive");
  const std::vector<double> taus = taus_on_grid(data, schedule);
  const size_t K = data.grid.size();
  std::vector<double> grad(K, 0.0);
  std::vector<double> future(K, 0.0);  // R_{k+1} seen from step k

  for (size_t n = 0; n < data.size(); ++n) {
    // Backward: future risk past each interior step.
    double R = step_cost_at(data, K - 1, eta, cost) + data.err[n][K - 1];
    for (size_t k = K - 1; k-- > 0;) {
      future[k] = R;
      const double q = soft_crossing(data.s_max[n][k], taus[k], sigma);
      R = step_cost_at(data, k, eta, cost) + q * data.err[n][k] + (1.0 - q) * R;
    }
    // Forward: survival-weighted local derivatives. The terminal decision is
    // forced, so tau at the last grid point has no crossing gradient.
    double survive = 1.0;
    for (size_t k = 0; k + 1 < K; ++k) {
      const double q = soft_crossing(data.s_max[n][k], taus[k], sigma);
      const double dq_dtau = -q * (1.0 - q) / sigma;
      grad[k] += survive * dq_dtau * (data.err[n][k] - future[k]);
      survive *= 1.0 - q;
    }
  }
  for (double& g : grad) g /= static_cast<double>(data.size());

  if (smoothness_weight > 0.0 && K > 1) {
    for (size_t k = 0; k < K; ++k) {
      if (k + 1 < K) grad[k] += 2.0 * smoothness_weight * (taus[k] - taus[k + 1]);
      if (k > 0) grad[k] -= 2.0 * smoothness_weight * (taus[k - 1] - taus[k]);
    }
  }
  return grad;
}

ThresholdSchedule optimize_schedule(const RiskDataset& data, double eta,
                                    const AnnealConfig& cfg,
                                    const ThresholdSchedule& init) {
  data.validate();
  cfg.validate();
  ThresholdSchedule cur;
  cur.times = data.grid;
  cur.cost_of_time = eta;
  cur.values.assign(data.grid.size(), 0.0);
  {
    const std::vector<double> t0 = taus_on_grid(data, init);
    std::copy(t0.begin(), t0.end(), cur.values.begin());
  }

  ThresholdSchedule best = cur;
  double best_risk = hard_risk(data, cur, eta, cfg.step_cost);

  for (int it = 1; it <= cfg.iterations; ++it) {
    const double sigma =
        std::max(cfg.floor, cfg.initial_temperature * std::pow(cfg.decay, it));
    const std::vector<double> g =
        risk_gradient(data, cur, eta, sigma, cfg.smoothness_weight, cfg.step_cost);
    for (size_t k = 0; k < cur.values.size(); ++k) cur.values[k] -= cfg.step_size * g[k];
    const double risk = hard_risk(data, cur, eta, cfg.step_cost);
    if (!std::isfinite(risk))
      throw std::runtime_error("optimize_schedule: risk diverged at iteration " +
                               std::to_string(it));
    if (risk < best_risk) {
      best_risk = risk;
      best = cur;
    }
  }
  best.cost_of_time = eta;
  return best;
}

ThresholdSchedule best_constant_schedule(const RiskDataset& data, double eta,
                                         int n_candidates, StepCost cost) {
  data.validate();
  double lo = 1e300, hi = -1e300;
  for (const auto& row : data.s_max)
    for (double s : row) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  // A candidate below every S stops at the first query; one above every S
  // rides to the cutoff. Both extremes are part of the sweep.
  lo -= 1e-6;
  hi += 1e-6;
  double best_tau = lo, best_risk = 1e300;
  for (int i = 0; i < n_candidates; ++i) {
    const double tau = lo + (hi - lo) * i / (n_candidates - 1);
    const double r = hard_risk(data, ThresholdSchedule::constant(tau), eta, cost);
    if (r < best_risk) {
      best_risk = r;
      best_tau = tau;
    }
  }
  ThresholdSchedule s = ThresholdSchedule::constant(best_tau);
  s.cost_of_time = eta;
  return s;
}

std::string schedule_csv(const ThresholdSchedule& s, double eta,
                         const AnnealConfig& cfg, uint64_t seed) {
  std::string out;
  out += "# eta=" + format_double(eta) + "\n";
  out += "# sigma0=" + format_double(cfg.initial_temperature) +
         " decay=" + format_double(cfg.decay) + " floor=" + format_double(cfg.floor) +
         " iterations=" + std::to_string(cfg.iterations) + "\n";
  out += "# smoothness_weight=" + format_double(cfg.smoothness_weight) +
         " step_size=" + format_double(cfg.step_size) + " seed=" + std::to_string(seed) +
         "\n";
  out += "ppp,tau\n";
  for (size_t k = 0; k < s.times.size(); ++k)
    out += format_double(s.times[k]) + "," + format_double(s.values[k]) + "\n";
  return out;
}

ThresholdSchedule schedule_from_csv(const std::string& text) {
  ThresholdSchedule s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("ppp,", 0) == 0) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("schedule csv: malformed row: " + line);
    s.times.push_back(std::stod(line.substr(0, comma)));
    s.values.push_back(std::stod(line.substr(comma + 1)));
  }
  s.validate();
  return s;
}

}  // namespace scotopic
