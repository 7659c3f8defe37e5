#include "scotopic/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scotopic {

namespace {
constexpr double kProbClamp = 1e-12;
}

int ClassPosterior::argmax() const {
  int best = 0;
  for (size_t i = 1; i < log_ratios.size(); ++i)
    if (log_ratios[i] > log_ratios[best]) best = static_cast<int>(i);
  return best;
}

ClassPosterior posterior_from_logits(const std::vector<double>& logits) {
  ClassPosterior out;
  out.probabilities = softmax(logits);
  out.log_ratios.resize(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    const double p = std::clamp(out.probabilities[i], kProbClamp, 1.0 - kProbClamp);
    out.log_ratios[i] = std::log(p / (1.0 - p));
  }
  return out;
}

double AdaptedNetwork::alpha(double t) const {
  if (t < 0.0) throw std::invalid_argument("alpha: negative exposure");
  return (reference_exposure + prior_strength) / (t + prior_strength);
}

double AdaptedNetwork::gamma(double t) const {
  if (t < 0.0) throw std::invalid_argument("gamma: negative exposure");
  return prior_strength * (reference_exposure - t) / (t + prior_strength);
}

std::vector<double> AdaptedNetwork::prior_coupling() const {
  const Layer* first = core.layers.front().get();
  if (first->kind() == LayerKind::Dense) {
    const auto* d = static_cast<const Dense*>(first);
    if (static_cast<int>(prior_mean.size()) != d->in_dim)
      throw std::invalid_argument("prior_coupling: mu size mismatch");
    std::vector<double> m(d->out_dim, 0.0);
    for (int o = 0; o < d->out_dim; ++o) {
      const double* w = &d->W.v[static_cast<size_t>(o) * d->in_dim];
      double acc = 0.0;
      for (int i = 0; i < d->in_dim; ++i) acc += w[i] * prior_mean[i];
      m[o] = acc;
    }
    return m;
  }
  if (first->kind() == LayerKind::Conv2D) {
    const auto* c = static_cast<const Conv2D*>(first);
    // Pool mu per channel: one scalar correction per feature map.
    std::vector<double> mu_bar(c->in_c, 0.0);
    const size_t positions = prior_mean.size() / c->in_c;
    for (size_t i = 0; i < positions; ++i)
      for (int ch = 0; ch < c->in_c; ++ch) mu_bar[ch] += prior_mean[i * c->in_c + ch];
    for (double& m : mu_bar) m /= static_cast<double>(positions);
    std::vector<double> m(c->out_c, 0.0);
    const int taps = c->k * c->k * c->in_c;
    for (int o = 0; o < c->out_c; ++o) {
      const double* w = &c->W.v[static_cast<size_t>(o) * taps];
      double acc = 0.0;
      for (int t = 0; t < taps; ++t) acc += w[t] * mu_bar[t % c->in_c];
      m[o] = acc;
    }
    return m;
  }
  throw std::invalid_argument("prior_coupling: first layer must be Dense or Conv2D");
}

std::vector<double> AdaptedNetwork::beta(double t) const {
  const std::vector<double> m = prior_coupling();
  const Layer* first = core.layers.front().get();
  const Tensor& b = first->kind() == LayerKind::Dense
                        ? static_cast<const Dense*>(first)->b
                        : static_cast<const Conv2D*>(first)->b;
  const double g = gamma(t);
  std::vector<double> out(m.size());
  for (size_t j = 0; j < m.size(); ++j) out[j] = g * m[j] + b[j];
  return out;
}

Tensor AdaptedNetwork::normalized_input(const CountImage& counts) const {
  Tensor x(core.input_shape);
  if (x.size() != counts.counts.size())
    throw std::invalid_argument("forward: counts do not match network input");
  for (size_t i = 0; i < x.size(); ++i) x.v[i] = counts.counts[i] / count_scale;
  return x;
}

Tensor AdaptedNetwork::adapted_hidden(const CountImage& counts, double t) const {
  const Tensor x = normalized_input(counts);
  const Layer* first = core.layers.front().get();
  Tensor y;
  first->forward(x, y);  // W x + b
  const double a = alpha(t);
  const double g = gamma(t);
  const std::vector<double> m = prior_coupling();
  if (first->kind() == LayerKind::Dense) {
    const Tensor& b = static_cast<const Dense*>(first)->b;
    for (size_t j = 0; j < y.size(); ++j)
      y.v[j] = a * (y.v[j] - b[j]) + g * m[j] + b[j];
  } else {
    const auto* c = static_cast<const Conv2D*>(first);
    const int oc = c->out_c;
    for (size_t i = 0; i < y.size(); ++i) {
      const int o = static_cast<int>(i % oc);
      y.v[i] = a * (y.v[i] - c->b[o]) + g * m[o] + c->b[o];
    }
  }
  return y;
}

ClassPosterior AdaptedNetwork::forward_adapted(const CountImage& counts) const {
  return forward_adapted_at(counts, counts.ppp);
}

ClassPosterior AdaptedNetwork::forward_adapted_at(const CountImage& counts, double t) const {
  const Tensor hidden = adapted_hidden(counts, t);
  const Tensor logits = core.forward_from(1, hidden);
  return posterior_from_logits(logits.v);
}

ClassPosterior AdaptedNetwork::forward_plain(const Tensor& x) const {
  return posterior_from_logits(core.forward(x).v);
}

ClassPosterior Specialist::forward_scaled(const CountImage& counts) const {
  Tensor x(net.input_shape);
  if (x.size() != counts.counts.size())
    throw std::invalid_argument("specialist: counts do not match network input");
  for (size_t i = 0; i < x.size(); ++i) x.v[i] = counts.counts[i] / anchor_ppp;
  return posterior_from_logits(net.forward(x).v);
}

int Ensemble::route(double ppp) const {
  if (members.empty()) throw std::invalid_argument("ensemble: empty");
  if (ppp <= 0.0) return 0;
  int best = 0;
  double best_d = std::abs(std::log(ppp) - std::log(members[0].anchor_ppp));
  for (size_t i = 1; i < members.size(); ++i) {
    const double d = std::abs(std::log(ppp) - std::log(members[i].anchor_ppp));
    if (d < best_d) {  // strict: ties stay at the lower anchor
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

CountImage rescale_counts(const CountImage& counts, double factor) {
  CountImage out = counts;
  for (double& v : out.counts) v *= factor;
  return out;
}

ClassPosterior forward_rate(const CountImage& counts, const Network& net) {
  if (counts.num_bins < 1 || counts.ppp <= 0.0)
    throw std::invalid_argument("forward_rate: requires t >= 1");
  Tensor x(net.input_shape);
  if (x.size() != counts.counts.size())
    throw std::invalid_argument("forward_rate: counts do not match network input");
  for (size_t i = 0; i < x.size(); ++i) x.v[i] = counts.counts[i] / counts.ppp;
  return posterior_from_logits(net.forward(x).v);
}

ClassPosterior forward_ensemble(const CountImage& counts, const Ensemble& ens) {
  const int who = ens.route(counts.ppp);
  const Specialist& s = ens.members[who];
  if (counts.ppp <= 0.0) {
    CountImage zeros = counts;
    std::fill(zeros.counts.begin(), zeros.counts.end(), 0.0);
    return s.forward_scaled(zeros);
  }
  return s.forward_scaled(rescale_counts(counts, s.anchor_ppp / counts.ppp));
}

ClassPosterior forward_photopic(const CountImage& counts, const Specialist& bright) {
  if (counts.num_bins < 1 || counts.ppp <= 0.0)
    throw std::invalid_argument("forward_photopic: requires t >= 1");
  return bright.forward_scaled(rescale_counts(counts, bright.anchor_ppp / counts.ppp));
}

}  // namespace scotopic
