#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scotopic/risk.hpp"

using namespace scotopic;
using scotopic::testing::grad_close;

namespace {

RiskDataset random_instance(int n_examples, int n_grid, uint64_t seed) {
  RiskDataset d;
  d.bin_width = 1.0;
  RngStream rng(seed, RngLane::Sample);
  d.grid.resize(n_grid);
  double p = 0.5;
  for (int k = 0; k < n_grid; ++k) {
    p += 0.3 + rng.uniform();
    d.grid[k] = p;
  }
  d.s_max.resize(n_examples);
  d.err.resize(n_examples);
  for (int n = 0; n < n_examples; ++n) {
    d.s_max[n].resize(n_grid);
    d.err[n].resize(n_grid);
    double s = -1.0;
    for (int k = 0; k < n_grid; ++k) {
      s += rng.normal() * 0.8 + 0.4;  // drifting evidence
      d.s_max[n][k] = s;
      d.err[n][k] = rng.uniform() < 0.3 ? 1 : 0;
    }
  }
  return d;
}

ThresholdSchedule schedule_on(const RiskDataset& d, std::vector<double> taus) {
  ThresholdSchedule s;
  s.times = d.grid;
  s.values = std::move(taus);
  return s;
}

}  // namespace

TEST_CASE("soft crossing values") {
  CHECK(soft_crossing(1.0, 1.0, 0.5) == doctest::Approx(0.5));
  CHECK(soft_crossing(1.0, 1.0, 0.01) == doctest::Approx(0.5));
  CHECK(soft_crossing(2.5, 1.0, 0.3) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-5.0))));  // +5 sigma margin
  CHECK(soft_crossing(1.0, 0.0, 1e-9) == doctest::Approx(1.0));
  CHECK_THROWS(soft_crossing(0.0, 0.0, 0.0));
}

TEST_CASE("hand-computed three-step risk") {
  RiskDataset d;
  d.grid = {1.0, 2.0, 3.0};
  d.bin_width = 1.0;
  d.s_max = {{0.0, 2.0, 4.0}};
  d.err = {{1, 1, 0}};
  const ThresholdSchedule tau = ThresholdSchedule::constant(1.0);
  // hard limit: skip at step 1 (margin -1), stop at step 2 (margin +1) with e=1
  // risk = 0.1 + (0.1 + 1) = 1.2 under either cost mode on this unit grid
  CHECK(bayes_risk(d, tau, 0.1, 0.01, StepCost::Constant) == doctest::Approx(1.2));
  CHECK(bayes_risk(d, tau, 0.1, 0.01, StepCost::PppIncrement) == doctest::Approx(1.2));
  CHECK(hard_risk(d, tau, 0.1, StepCost::Constant) == doctest::Approx(1.2));

  // single grid point, forced wrong decision: risk = eta*Delta + 1
  RiskDataset single;
  single.grid = {1.0};
  single.bin_width = 1.0;
  single.s_max = {{10.0}};
  single.err = {{1}};
  CHECK(bayes_risk(single, ThresholdSchedule::constant(0.0), 0.1, 0.01,
                   StepCost::Constant) == doctest::Approx(1.1));

  // eta = 0 and a perfect classifier with an always-crossing threshold: no risk
  RiskDataset perfect;
  perfect.grid = {1.0, 2.0};
  perfect.bin_width = 1.0;
  perfect.s_max = {{5.0, 5.0}};
  perfect.err = {{0, 0}};
  CHECK(hard_risk(perfect, ThresholdSchedule::constant(-1e9), 0.0) ==
        doctest::Approx(0.0));
}

TEST_CASE("relaxed risk converges to the stopping-rule enumeration") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const RiskDataset d = random_instance(10, 8, seed);
    RngStream rng(seed, RngLane::Sample, 9);
    std::vector<double> taus(d.grid.size());
    for (double& t : taus) t = rng.normal() * 2.0;
    const ThresholdSchedule s = schedule_on(d, taus);
    for (StepCost cost : {StepCost::PppIncrement, StepCost::Constant}) {
      const double relaxed = bayes_risk(d, s, 0.02, 1e-6, cost);
      const double exact = hard_risk(d, s, 0.02, cost);
      CHECK(std::abs(relaxed - exact) < 1e-9);
    }
  }
}

TEST_CASE("risk gradient matches finite differences") {
  for (double sigma : {0.5, 0.1, 0.05}) {
    const RiskDataset d = random_instance(10, 8, 77);
    RngStream rng(78, RngLane::Sample);
    std::vector<double> taus(d.grid.size());
    for (double& t : taus) t = rng.normal();
    ThresholdSchedule s = schedule_on(d, taus);
    const double w = 0.01, eta = 0.05;
    const auto grad = risk_gradient(d, s, eta, sigma, w);
    for (size_t k = 0; k < s.values.size(); ++k) {
      const double saved = s.values[k];
      s.values[k] = saved + 1e-5;
      const double up = bayes_risk(d, s, eta, sigma) + [&] {
        double pen = 0.0;
        for (size_t j = 0; j + 1 < s.values.size(); ++j)
          pen += w * (s.values[j] - s.values[j + 1]) * (s.values[j] - s.values[j + 1]);
        return pen;
      }();
      s.values[k] = saved - 1e-5;
      const double down = bayes_risk(d, s, eta, sigma) + [&] {
        double pen = 0.0;
        for (size_t j = 0; j + 1 < s.values.size(); ++j)
          pen += w * (s.values[j] - s.values[j + 1]) * (s.values[j] - s.values[j + 1]);
        return pen;
      }();
      s.values[k] = saved;
      const double numeric = (up - down) / 2e-5;
      CHECK_MESSAGE(grad_close(grad[k], numeric, 1e-4, 1e-8), "sigma ", sigma, " k ", k,
                    " analytic ", grad[k], " numeric ", numeric);
    }
  }
}

TEST_CASE("identical examples leave the gradient unchanged") {
  RiskDataset one = random_instance(1, 2, 5);
  RiskDataset ten = one;
  for (int i = 1; i < 10; ++i) {
    ten.s_max.push_back(one.s_max[0]);
    ten.err.push_back(one.err[0]);
  }
  const ThresholdSchedule s = schedule_on(one, {0.3, 0.3});
  const auto g1 = risk_gradient(one, s, 0.01, 0.2, 0.0);
  const auto g10 = risk_gradient(ten, s, 0.01, 0.2, 0.0);
  for (size_t k = 0; k < g1.size(); ++k) CHECK(g1[k] == doctest::Approx(g10[k]));
}

TEST_CASE("crossing gradient saturates at the temperature floor") {
  RiskDataset d;
  d.grid = {1.0, 2.0};
  d.bin_width = 1.0;
  d.s_max = {{2.5, 2.5}};  // margin +1.5 over tau = 1
  d.err = {{0, 0}};
  const auto g = risk_gradient(d, ThresholdSchedule::constant(1.0), 0.01, 0.01, 0.0);
  CHECK(std::abs(g[0]) < 1e-40);
}

TEST_CASE("risk depends only on margins") {
  const RiskDataset d = random_instance(6, 5, 12);
  RiskDataset shifted = d;
  for (auto& row : shifted.s_max)
    for (double& s : row) s += 3.7;
  std::vector<double> taus = {0.1, 0.2, -0.4, 0.6, 0.0};
  std::vector<double> taus_shifted = taus;
  for (double& t : taus_shifted) t += 3.7;
  const double a = bayes_risk(d, schedule_on(d, taus), 0.03, 0.2);
  const double b = bayes_risk(shifted, schedule_on(shifted, taus_shifted), 0.03, 0.2);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("optimization never loses to its initialization") {
  const RiskDataset d = random_instance(40, 12, 31);
  AnnealConfig cfg;
  cfg.iterations = 200;
  for (double eta : {0.001, 0.01, 0.1}) {
    const ThresholdSchedule init = best_constant_schedule(d, eta);
    const double init_risk = hard_risk(d, init, eta);
    const ThresholdSchedule tuned = optimize_schedule(d, eta, cfg, init);
    const double tuned_risk = hard_risk(d, tuned, eta);
    CHECK(tuned_risk <= init_risk + 1e-12);
    CHECK(tuned.cost_of_time == eta);
  }
}

TEST_CASE("a heavy time cost drives stopping to the first query") {
  const RiskDataset d = random_instance(30, 10, 41);
  AnnealConfig cfg;
  cfg.iterations = 150;
  const double eta = 10.0;  // eta * Delta = 10 with unit bins
  const ThresholdSchedule init = best_constant_schedule(d, eta, 50, StepCost::Constant);
  cfg.step_cost = StepCost::Constant;
  const ThresholdSchedule tuned = optimize_schedule(d, eta, cfg, init);
  // with stop-now cost so high, every example should stop at the first point
  for (size_t n = 0; n < d.size(); ++n)
    CHECK(d.s_max[n][0] > tuned.values.front());
}

TEST_CASE("schedule csv round trip") {
  ThresholdSchedule s;
  s.times = {0.22, 2.2, 22.0};
  s.values = {1.0, 2.0, 1.5};
  AnnealConfig cfg;
  const std::string csv = schedule_csv(s, 0.01, cfg, 7);
  const ThresholdSchedule back = schedule_from_csv(csv);
  CHECK(back.times == s.times);
  CHECK(back.values == s.values);
  CHECK(csv.find("# eta=0.01") != std::string::npos);
}
