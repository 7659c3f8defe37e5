#include "scotopic/light.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "scotopic/rng.hpp"
#include "scotopic/util.hpp"

namespace scotopic {

double pooled_response(const CountImage& counts, int s, int k) {
  if (s < 1 || k < 1) throw std::invalid_argument("pooled_response: s, k must be >= 1");
  if (counts.height < s || counts.width < s)
    throw std::invalid_argument("pooled_response: image smaller than the box");
  const int oh = counts.height - s + 1;
  const int ow = counts.width - s + 1;
  if (static_cast<long>(k) > static_cast<long>(oh) * ow)
    throw std::invalid_argument("pooled_response: k exceeds the number of box positions");

  // Box sums pool across channels as well: total photons in the window.
  std::vector<double> responses;
  responses.reserve(static_cast<size_t>(oh) * ow);
  const int ch = counts.channels;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx)
          for (int c = 0; c < ch; ++c)
            sum += counts.counts[(static_cast<size_t>(y + dy) * counts.width + (x + dx)) * ch + c];
      responses.push_back(sum);
    }
  }
  std::partial_sort(responses.begin(), responses.begin() + k, responses.end(),
                    std::greater<double>());
  std::vector<double> top(responses.begin(), responses.begin() + k);
  return median_of(std::move(top));
}

namespace {

// Least-squares fit of y ~ a r^2 + b r + c via the 3x3 normal equations.
bool quad_fit(const std::vector<double>& r, const std::vector<double>& y,
              double& a, double& b, double& c) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double t0 = 0, t1 = 0, t2 = 0;
  for (size_t i = 0; i < r.size(); ++i) {
    const double x = r[i], x2 = x * x;
    s0 += 1;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    t0 += y[i];
    t1 += x * y[i];
    t2 += x2 * y[i];
  }
  double m[3][4] = {{s4, s3, s2, t2}, {s3, s2, s1, t1}, {s2, s1, s0, t0}};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::abs(m[row][col]) > std::abs(m[piv][col])) piv = row;
    if (std::abs(m[piv][col]) < 1e-12) return false;
    std::swap(m[col], m[piv]);
    for (int row = 0; row < 3; ++row) {
      if (row == col) continue;
      const double f = m[row][col] / m[col][col];
      for (int cc = col; cc < 4; ++cc) m[row][cc] -= f * m[col][cc];
    }
  }
  a = m[0][3] / m[0][0];
  b = m[1][3] / m[1][1];
  c = m[2][3] / m[2][2];
  return true;
}

}  // namespace

LightEstimator fit_light_estimator(const std::vector<std::pair<CountImage, double>>& pairs,
                                   const std::vector<int>& s_candidates,
                                   const std::vector<int>& k_candidates,
                                   uint64_t split_seed) {
  if (pairs.size() < 10)
    throw std::invalid_argument("fit_light_estimator: need at least 10 training pairs");
  double pmin = 1e300, pmax = 0.0;
  for (const auto& [img, ppp] : pairs) {
    if (!(ppp > 0.0)) throw std::invalid_argument("fit_light_estimator: non-positive PPP");
    pmin = std::min(pmin, ppp);
    pmax = std::max(pmax, ppp);
  }
  if (pmax / pmin < 10.0)
    throw std::invalid_argument("fit_light_estimator: training PPPs must span a decade");

  // Deterministic 80/20 split for candidate selection.
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng(split_seed, RngLane::Split);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  const size_t n_hold = std::max<size_t>(1, pairs.size() / 5);
  const size_t n_fit = pairs.size() - n_hold;

  LightEstimator best;
  double best_err = 1e300;
  std::vector<double> r_fit, y_fit;
  for (int s : s_candidates) {
    for (int k : k_candidates) {
      bool valid = true;
      std::vector<double> responses(pairs.size());
      for (size_t i = 0; i < pairs.size() && valid; ++i) {
        const CountImage& img = pairs[i].first;
        if (img.height < s || img.width < s ||
            k > (img.height - s + 1) * (img.width - s + 1)) {
          valid = false;
          break;
        }
        responses[i] = std::log1p(pooled_response(img, s, k));
      }
      if (!valid) continue;

      r_fit.clear();
      y_fit.clear();
      for (size_t i = 0; i < n_fit; ++i) {
        r_fit.push_back(responses[order[i]]);
        y_fit.push_back(std::log(pairs[order[i]].second));
      }
      double rmin = *std::min_element(r_fit.begin(), r_fit.end());
      double rmax = *std::max_element(r_fit.begin(), r_fit.end());
      if (rmax - rmin < 1e-9) continue;  // degenerate: all responses equal

      double a, b, c;
      if (!quad_fit(r_fit, y_fit, a, b, c)) continue;

      std::vector<double> rel_errs;
      for (size_t i = n_fit; i < pairs.size(); ++i) {
        const double r = responses[order[i]];
        const double pred = std::exp(a * r * r + b * r + c);
        const double truth = pairs[order[i]].second;
        rel_errs.push_back(std::abs(pred - truth) / truth);
      }
      const double err = median_of(std::move(rel_errs));
      if (err < best_err) {
        best_err = err;
        best.box_size = s;
        best.top_k = k;
        best.a = a;
        best.b = b;
        best.c = c;
      }
    }
  }
  if (!best.fitted())
    throw std::runtime_error("fit_light_estimator: all candidates degenerate");
  best.min_train_ppp = pmin;
  best.max_train_ppp = pmax;
  best.diag.holdout_median_rel_err = best_err;
  best.diag.n_train = static_cast<int>(pairs.size());
  return best;
}

double estimate_ppp(const LightEstimator& est, const CountImage& counts) {
  if (!est.fitted()) throw std::invalid_argument("estimate_ppp: estimator not fitted");
  const double r = std::log1p(pooled_response(counts, est.box_size, est.top_k));
  const double log_ppp = est.a * r * r + est.b * r + est.c;
  const double p = std::exp(log_ppp);
  return std::clamp(p, est.min_train_ppp / 10.0, est.max_train_ppp * 10.0);
}

std::string light_estimator_csv(const LightEstimator& est) {
  std::string out = "s,k,a,b,c,min_train_ppp,max_train_ppp,holdout_median_rel_err\n";
  out += std::to_string(est.box_size) + "," + std::to_string(est.top_k) + "," +
         format_double(est.a) + "," + format_double(est.b) + "," + format_double(est.c) +
         "," + format_double(est.min_train_ppp) + "," + format_double(est.max_train_ppp) +
         "," + format_double(est.diag.holdout_median_rel_err) + "\n";
  return out;
}

LightEstimator light_estimator_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row))
    throw std::invalid_argument("light estimator csv: missing rows");
  std::vector<std::string> cells;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 8) throw std::invalid_argument("light estimator csv: bad row");
  LightEstimator est;
  est.box_size = std::stoi(cells[0]);
  est.top_k = std::stoi(cells[1]);
  est.a = std::stod(cells[2]);
  est.b = std::stod(cells[3]);
  est.c = std::stod(cells[4]);
  est.min_train_ppp = std::stod(cells[5]);
  est.max_train_ppp = std::stod(cells[6]);
  est.diag.holdout_median_rel_err = std::stod(cells[7]);
  return est;
}

}  // namespace scotopic
