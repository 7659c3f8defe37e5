#include "scotopic/sprt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scotopic/util.hpp"

namespace scotopic {

ThresholdSchedule ThresholdSchedule::constant(double tau) {
  ThresholdSchedule s;
  s.times = {1.0};
  s.values = {tau};
  return s;
}

void ThresholdSchedule::validate() const {
  if (times.empty() || times.size() != values.size())
    throw std::invalid_argument("schedule: times/values mismatch");
  for (size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("schedule: times must be strictly ascending");
  for (double t : times)
    if (!(t > 0.0)) throw std::invalid_argument("schedule: times must be positive");
}

double ThresholdSchedule::at(double ppp) const {
  validate();
  if (values.size() == 1) return values[0];
  if (ppp <= times.front()) return values.front();
  if (ppp >= times.back()) return values.back();
  const double x = std::log(ppp);
  size_t hi = 1;
  while (times[hi] < ppp) ++hi;
  const double x0 = std::log(times[hi - 1]);
  const double x1 = std::log(times[hi]);
  const double f = (x - x0) / (x1 - x0);
  return values[hi - 1] + f * (values[hi] - values[hi - 1]);
}

double error_bound(double tau) { return 1.0 / (1.0 + std::exp(tau)); }

std::vector<double> log_ppp_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2)
    throw std::invalid_argument("log_ppp_grid: bad range");
  std::vector<double> g(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(llo + (lhi - llo) * i / (n - 1));
  return g;
}

std::vector<int> snap_query_bins(const PhotonStream& stream,
                                 const std::vector<double>& query_ppps, double max_ppp) {
  const double per_bin = stream.config().ppp_per_bin();
  std::vector<int> bins;
  for (double p : query_ppps) {
    if (p > max_ppp * (1.0 + 1e-12)) continue;
    int t = static_cast<int>(std::lround(p / per_bin));
    t = std::clamp(t, 1, stream.num_bins());
    if (bins.empty() || t > bins.back()) bins.push_back(t);
  }
  int t_max = std::clamp(static_cast<int>(std::lround(max_ppp / per_bin)), 1,
                         stream.num_bins());
  if (bins.empty() || bins.back() < t_max) bins.push_back(t_max);
  return bins;
}

DecisionTrace decide_fr(const PhotonStream& stream, const PosteriorModel& model,
                        const ThresholdSchedule& schedule,
                        const std::vector<double>& query_ppps, double max_ppp,
                        uint64_t readout_seed) {
  if (query_ppps.empty()) throw std::invalid_argument("decide_fr: no query points");
  schedule.validate();
  const std::vector<int> bins = snap_query_bins(stream, query_ppps, max_ppp);

  DecisionTrace trace;
  trace.regime = Regime::FreeResponse;
  trace.true_class = stream.label();

  PhotonStream::Cursor cur(stream);
  for (size_t qi = 0; qi < bins.size(); ++qi) {
    cur.advance_to(bins[qi]);
    CountImage counts = cur.counts();
    counts = readout(counts, stream, stream.config(),
                     mix_seed(readout_seed, static_cast<uint64_t>(bins[qi])));
    const ClassPosterior post = model.eval(counts);
    trace.query_ppps.push_back(counts.ppp);
    trace.log_ratio_trajectory.push_back(post.log_ratios);
    const int cstar = post.argmax();
    const double s = post.log_ratios[cstar];
    const bool last = qi + 1 == bins.size();
    if (s > schedule.at(counts.ppp)) {
      trace.stop_ppp = counts.ppp;
      trace.declared_class = cstar;
      trace.stopped_by = StopReason::ThresholdCrossing;
      return trace;
    }
    if (last) {
      trace.stop_ppp = counts.ppp;
      trace.declared_class = cstar;
      trace.stopped_by = StopReason::Cutoff;
    }
  }
  return trace;
}

DecisionTrace decide_int(const PhotonStream& stream, const PosteriorModel& model,
                         double ppp, uint64_t readout_seed) {
  const double per_bin = stream.config().ppp_per_bin();
  const int want = static_cast<int>(std::lround(ppp / per_bin));
  if (want > stream.num_bins())
    throw std::invalid_argument("decide_int: requested PPP beyond stream capacity");
  DecisionTrace trace = decide_fr(stream, model,
                                  ThresholdSchedule::constant(1e300), {ppp}, ppp,
                                  readout_seed);
  trace.regime = Regime::Interrogation;
  return trace;
}

Trajectory eval_trajectory(const PhotonStream& stream, const PosteriorModel& model,
                           const std::vector<double>& query_ppps, uint64_t readout_seed) {
  if (query_ppps.empty()) throw std::invalid_argument("eval_trajectory: empty grid");
  const std::vector<int> bins = snap_query_bins(stream, query_ppps, query_ppps.back());
  Trajectory out;
  PhotonStream::Cursor cur(stream);
  for (int t : bins) {
    cur.advance_to(t);
    CountImage counts = cur.counts();
    counts = readout(counts, stream, stream.config(),
                     mix_seed(readout_seed, static_cast<uint64_t>(t)));
    const ClassPosterior post = model.eval(counts);
    const int cstar = post.argmax();
    out.ppps.push_back(counts.ppp);
    out.s_max.push_back(post.log_ratios[cstar]);
    out.err.push_back(cstar == stream.label() ? 0 : 1);
  }
  return out;
}

namespace {

struct StopOutcome {
  double ppp;
  bool correct;
};

StopOutcome stop_for_threshold(const Trajectory& tr, double tau) {
  for (size_t k = 0; k < tr.ppps.size(); ++k)
    if (tr.s_max[k] > tau) return {tr.ppps[k], tr.err[k] == 0};
  const size_t last = tr.ppps.size() - 1;
  return {tr.ppps[last], tr.err[last] == 0};
}

SatRow summarize(Regime regime, double value, const std::vector<double>& stop_ppps,
                 const std::vector<uint8_t>& wrong, int bootstrap, uint64_t bseed) {
  SatRow row{};
  row.regime = regime;
  row.threshold_or_ppp = value;
  row.n_examples = static_cast<int>(stop_ppps.size());
  row.median_ppp = median_of(stop_ppps);
  row.mean_ppp = mean_of(stop_ppps);
  double werr = 0.0;
  for (uint8_t w : wrong) werr += w;
  row.error_rate = werr / static_cast<double>(wrong.size());

  if (bootstrap > 0) {
    std::vector<double> medians(bootstrap), errors(bootstrap);
    std::vector<double> sample(stop_ppps.size());
    RngStream rng(bseed, RngLane::Bootstrap);
    for (int rep = 0; rep < bootstrap; ++rep) {
      double e = 0.0;
      for (size_t i = 0; i < stop_ppps.size(); ++i) {
        const size_t j = static_cast<size_t>(rng.below(stop_ppps.size()));
        sample[i] = stop_ppps[j];
        e += wrong[j];
      }
      medians[rep] = median_of(sample);
      errors[rep] = e / static_cast<double>(stop_ppps.size());
    }
    const double mm = mean_of(medians), me = mean_of(errors);
    double vm = 0.0, ve = 0.0;
    for (int rep = 0; rep < bootstrap; ++rep) {
      vm += (medians[rep] - mm) * (medians[rep] - mm);
      ve += (errors[rep] - me) * (errors[rep] - me);
    }
    row.median_ppp_se = std::sqrt(vm / bootstrap);
    row.error_se = std::sqrt(ve / bootstrap);
  }
  return row;
}

}  // namespace

std::vector<SatRow> sat_sweep(const std::vector<IntensityImage>& dataset,
                              const PosteriorModel& model, const NoiseConfig& noise,
                              const SatOptions& opt) {
  if (dataset.empty()) throw std::invalid_argument("sat_sweep: empty dataset");
  std::vector<SatRow> rows;
  if (opt.values.empty()) return rows;

  const size_t n = dataset.size();
  const double per_bin = noise.ppp_per_bin();
  const int stream_bins =
      std::max(1, static_cast<int>(std::lround(opt.max_ppp / per_bin)));

  if (opt.regime == Regime::Interrogation) {
    std::vector<std::vector<uint8_t>> wrong(opt.values.size(),
                                            std::vector<uint8_t>(n, 0));
    parallel_chunks(n, 16, opt.threads, [&](size_t b, size_t e) {
      for (size_t i = b; i < e; ++i) {
        PhotonStream stream(dataset[i], noise, stream_bins, mix_seed(opt.stream_seed, i));
        PhotonStream::Cursor cur(stream);
        for (size_t vi = 0; vi < opt.values.size(); ++vi) {
          const int t = std::clamp(
              static_cast<int>(std::lround(opt.values[vi] / per_bin)), 1, stream_bins);
          cur.advance_to(t);
          CountImage counts = cur.counts();
          counts = readout(counts, stream, noise,
                           mix_seed(mix_seed(opt.readout_seed, i), static_cast<uint64_t>(t)));
          const ClassPosterior post = model.eval(counts);
          wrong[vi][i] = post.argmax() == dataset[i].label ? 0 : 1;
        }
      }
    });
    for (size_t vi = 0; vi < opt.values.size(); ++vi) {
      std::vector<double> ppps(n, opt.values[vi]);
      rows.push_back(summarize(Regime::Interrogation, opt.values[vi], ppps, wrong[vi],
                               opt.bootstrap, mix_seed(opt.bootstrap_seed, vi)));
      rows.back().median_ppp_se = 0.0;
    }
    return rows;
  }

  // FR: one trajectory pass per example serves every threshold.
  std::vector<Trajectory> trajectories(n);
  parallel_chunks(n, 16, opt.threads, [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      PhotonStream stream(dataset[i], noise, stream_bins, mix_seed(opt.stream_seed, i));
      trajectories[i] =
          eval_trajectory(stream, model, opt.grid, mix_seed(opt.readout_seed, i));
    }
  });
  for (size_t vi = 0; vi < opt.values.size(); ++vi) {
    std::vector<double> stops(n);
    std::vector<uint8_t> wrong(n);
    for (size_t i = 0; i < n; ++i) {
      const StopOutcome oc = stop_for_threshold(trajectories[i], opt.values[vi]);
      stops[i] = oc.ppp;
      wrong[i] = oc.correct ? 0 : 1;
    }
    rows.push_back(summarize(Regime::FreeResponse, opt.values[vi], stops, wrong,
                             opt.bootstrap, mix_seed(opt.bootstrap_seed, vi)));
  }
  return rows;
}

std::string sat_csv_header() {
  return "regime,threshold_or_ppp,median_ppp,mean_ppp,error_rate,median_ppp_se,"
         "error_se,n_examples";
}

std::string sat_csv_row(const SatRow& row) {
  std::string s = row.regime == Regime::FreeResponse ? "FR" : "INT";
  s += ',';
  s += format_double(row.threshold_or_ppp);
  s += ',';
  s += format_double(row.median_ppp);
  s += ',';
  s += format_double(row.mean_ppp);
  s += ',';
  s += format_double(row.error_rate);
  s += ',';
  s += format_double(row.median_ppp_se);
  s += ',';
  s += format_double(row.error_se);
  s += ',';
  s += std::to_string(row.n_examples);
  return s;
}

}  // namespace scotopic
