#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scotopic/classifier.hpp"
#include "scotopic/sensor.hpp"

namespace scotopic {

// PPP estimator for unknown/varying illuminance: box-filter the counts, take
// the median of the top-k responses, and map it through a fitted quadratic.
// The quadratic lives in log space (r = log1p(response) vs log PPP) since PPP
// spans three decades.
struct LightEstimator {
  int box_size = 0;   // s
  int top_k = 0;      // k
  double a = 0.0, b = 0.0, c = 0.0;  // log_ppp ~ a r^2 + b r + c
  double min_train_ppp = 0.0;
  double max_train_ppp = 0.0;

  struct Diagnostics {
    double holdout_median_rel_err = 0.0;
    int n_train = 0;
  } diag;

  bool fitted() const { return box_size > 0; }
};

// Median of the k largest s-by-s box sums over all valid positions.
double pooled_response(const CountImage& counts, int s, int k);

// Grid-search (s, k), least-squares quadratic per candidate, selection by
// held-out median relative PPP error.
LightEstimator fit_light_estimator(const std::vector<std::pair<CountImage, double>>& pairs,
                                   const std::vector<int>& s_candidates,
                                   const std::vector<int>& k_candidates,
                                   uint64_t split_seed);

// Pooled response through the fitted quadratic, clamped to a decade beyond
// the training PPP range.
double estimate_ppp(const LightEstimator& est, const CountImage& counts);

std::string light_estimator_csv(const LightEstimator& est);
LightEstimator light_estimator_from_csv(const std::string& text);

// Adapts the classifier from the estimated light level: PPP_hat converted to
// an equivalent exposure on the model clock.
class EstimatedLightPosterior : public PosteriorModel {
 public:
  EstimatedLightPosterior(const AdaptedNetwork& net, const LightEstimator& est)
      : net_(&net), est_(&est) {}
  int num_classes() const override { return net_->num_classes(); }
  ClassPosterior eval(const CountImage& counts) const override {
    const double ppp_hat = estimate_ppp(*est_, counts);
    return net_->forward_adapted_at(counts, ppp_hat);
  }

 private:
  const AdaptedNetwork* net_;
  const LightEstimator* est_;
};

}  // namespace scotopic
