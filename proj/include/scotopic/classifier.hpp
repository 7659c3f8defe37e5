#pragma once

#include <memory>
#include <vector>

#include "scotopic/net.hpp"
#include "scotopic/sensor.hpp"

namespace scotopic {

// Softmax probabilities over K classes plus the one-vs-rest log posterior
// ratios S_c = log(p_c / (1 - p_c)) the sequential test races to threshold.
struct ClassPosterior {
  std::vector<double> probabilities;
  std::vector<double> log_ratios;

  int argmax() const;
};

ClassPosterior posterior_from_logits(const std::vector<double>& logits);

// The exposure-adaptive classifier: first layer computed as
// alpha(t) * W * N_t + beta(t), downstream layers unchanged. `core` holds the
// full stack; layer 0 must be Dense or Conv2D. Counts are divided by
// `count_scale` before W (a fixed data scaling folded into the model), and
// `prior_mean` is stored on that same normalized per-bin scale.
//
// The model clock runs at one bin per unit PPP, so exposure arguments (t, t0,
// T) are PPP-denominated; a stream exposure converts to model bins by
// inverting PPP = lambda * t * Delta against the model's unit rate. This
// keeps the adaptation independent of how finely a sensor bins time.
struct AdaptedNetwork {
  Network core;
  Tensor prior_mean;              // mu: per-pixel prior rate (normalized units)
  double prior_strength = 1.0;    // t0 > 0
  double reference_exposure = 1;  // T, bins of a full-quality exposure
  double count_scale = 1.0;

  // alpha(t) = (T + t0) / (t + t0); equals 1 at t = T.
  double alpha(double t) const;
  // gamma(t) = t0 (T - t) / (t + t0), the prior correction weight in beta.
  double gamma(double t) const;
  // Per-feature coupling sum_i W_ij mu_i. For a convolutional first layer the
  // prior is pooled per channel (translation-invariant within the receptive
  // field), giving one scalar per feature map.
  std::vector<double> prior_coupling() const;
  // beta_j(t) = gamma(t) * coupling_j + b_j. One entry per hidden unit for a
  // dense first layer, one per feature map for a convolutional one.
  std::vector<double> beta(double t) const;

  // Normalized input tensor x = counts / count_scale shaped for the core.
  Tensor normalized_input(const CountImage& counts) const;
  // Pre-nonlinearity adapted first-layer features.
  Tensor adapted_hidden(const CountImage& counts, double t) const;
  // Full pass with t taken from the count image's exposure metadata.
  ClassPosterior forward_adapted(const CountImage& counts) const;
  // Full pass at an explicit (possibly estimated, non-integer) exposure.
  ClassPosterior forward_adapted_at(const CountImage& counts, double t) const;
  // Standard unadapted pass on an already-normalized input.
  ClassPosterior forward_plain(const Tensor& x) const;

  int num_classes() const { return core.num_classes(); }
};

// A specialist trained at one fixed light level; operates on counts
// normalized by its anchor PPP.
struct Specialist {
  double anchor_ppp = 0.0;
  Network net;

  ClassPosterior forward_scaled(const CountImage& counts_at_anchor_scale) const;
};

struct Ensemble {
  std::vector<Specialist> members;  // anchors ascending

  // Nearest anchor in log-PPP; ties break toward the lower anchor.
  int route(double ppp) const;
};

CountImage rescale_counts(const CountImage& counts, double factor);

// Rate baseline: standard pass on the time-normalized image N_t / t, scaled
// to the intensity range of the training images (i.e. N / PPP).
ClassPosterior forward_rate(const CountImage& counts, const Network& net);

// Ensemble baseline: route to the nearest specialist in log-PPP after
// count-space rescaling to that specialist's expected total.
ClassPosterior forward_ensemble(const CountImage& counts, const Ensemble& ens);

// Photopic baseline: rescale counts to the bright specialist's level and run
// it unmodified.
ClassPosterior forward_photopic(const CountImage& counts, const Specialist& bright);

// Anything that maps a count image to class posteriors; the sequential
// decision layer is generic over this.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;
  virtual int num_classes() const = 0;
  virtual ClassPosterior eval(const CountImage& counts) const = 0;
};

class AdaptedPosterior : public PosteriorModel {
 public:
  explicit AdaptedPosterior(const AdaptedNetwork& net) : net_(&net) {}
  int num_classes() const override { return net_->num_classes(); }
  ClassPosterior eval(const CountImage& counts) const override {
    return net_->forward_adapted(counts);
  }

 private:
  const AdaptedNetwork* net_;
};

class RatePosterior : public PosteriorModel {
 public:
  explicit RatePosterior(const Network& net) : net_(&net) {}
  int num_classes() const override { return net_->num_classes(); }
  ClassPosterior eval(const CountImage& counts) const override {
    return forward_rate(counts, *net_);
  }

 private:
  const Network* net_;
};

class PhotopicPosterior : public PosteriorModel {
 public:
  explicit PhotopicPosterior(const Specialist& s) : spec_(&s) {}
  int num_classes() const override { return spec_->net.num_classes(); }
  ClassPosterior eval(const CountImage& counts) const override {
    return forward_photopic(counts, *spec_);
  }

 private:
  const Specialist* spec_;
};

class EnsemblePosterior : public PosteriorModel {
 public:
  explicit EnsemblePosterior(const Ensemble& e) : ens_(&e) {}
  int num_classes() const override { return ens_->members.front().net.num_classes(); }
  ClassPosterior eval(const CountImage& counts) const override {
    return forward_ensemble(counts, *ens_);
  }

 private:
  const Ensemble* ens_;
};

}  // namespace scotopic
