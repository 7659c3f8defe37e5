#include "scotopic/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace scotopic {

namespace {

constexpr double kT0Floor = 1e-4;

enum class InputMode { Adapted, Rate, FixedAnchor };

struct SampleGrad {
  double t0 = 0.0;
};

// Forward + backward for one (image, exposure) sample. Returns the NLL.
// For the adapted mode the first layer is alpha(t) W x + gamma(t) m + b, so
// its parameter gradients pick up the alpha scaling, the mu coupling on the
// filters, and a scalar gradient for t0.
double train_sample(AdaptedNetwork& model, InputMode mode, const CountImage& counts,
                    double ppp, int label, std::vector<Layer::Cache>& caches,
                    SampleGrad* extra) {
  Network& net = model.core;
  const size_t L = net.layers.size();
  caches.resize(L);

  Tensor x(net.input_shape);
  if (x.size() != counts.counts.size())
    throw std::invalid_argument("train: counts do not match network input");
  double scale;
  switch (mode) {
    case InputMode::Adapted: scale = model.count_scale; break;
    default: scale = ppp;  // rate / specialist inputs are PPP-normalized
  }
  for (size_t i = 0; i < x.size(); ++i) x.v[i] = counts.counts[i] / scale;

  // forward
  Tensor cur, next;
  std::vector<double> coupling;
  Tensor y0;  // W x + b before adaptation, kept for the t0 gradient
  double a = 1.0, g = 0.0;
  net.layers[0]->forward_train(x, cur, caches[0]);
  if (mode == InputMode::Adapted) {
    const double t = ppp;  // model clock: one bin per unit PPP
    a = model.alpha(t);
    g = model.gamma(t);
    coupling = model.prior_coupling();
    Layer* first = net.layers[0].get();
    const Tensor& b = first->kind() == LayerKind::Dense
                          ? static_cast<Dense*>(first)->b
                          : static_cast<Conv2D*>(first)->b;
    if (extra) y0 = cur;
    const size_t n_feat = coupling.size();
    for (size_t i = 0; i < cur.size(); ++i) {
      const size_t j = i % n_feat;  // dense: i == j; conv: feature-map index
      cur.v[i] = a * (cur.v[i] - b[j]) + g * coupling[j] + b[j];
    }
  }
  for (size_t l = 1; l < L; ++l) {
    net.layers[l]->forward_train(cur, next, caches[l]);
    std::swap(cur, next);
  }

  Tensor grad;
  const double loss = softmax_nll(cur, label, &grad);

  // backward
  Tensor grad_in;
  for (size_t l = L - 1; l >= 1; --l) {
    net.layers[l]->backward(caches[l], grad, grad_in);
    std::swap(grad, grad_in);
  }

  Layer* first = net.layers[0].get();
  if (mode != InputMode::Adapted) {
    first->backward(caches[0], grad, grad_in);
    return loss;
  }

  // Let delta be dL/d(adapted hidden). Since h = alpha*(W x) + gamma*m + b:
  //   dL/dW = alpha * (standard W grad from delta) + gamma * mu-coupling term
  //   dL/db = sum of delta per feature
  //   dL/dt0 = sum_j delta_j * (dalpha*(W x)_j + dgamma*m_j)
  const double t = ppp;
  const double t0 = model.prior_strength;
  const double T = model.reference_exposure;
  const double denom = (t + t0) * (t + t0);
  const double dalpha = (t - T) / denom;
  const double dgamma = (T - t) * t / denom;

  const size_t n_feat = coupling.size();
  std::vector<double> delta_sum(n_feat, 0.0);  // sum of delta per feature
  for (size_t i = 0; i < grad.size(); ++i) delta_sum[i % n_feat] += grad.v[i];

  if (extra) {
    const Tensor& b = first->kind() == LayerKind::Dense
                          ? static_cast<Dense*>(first)->b
                          : static_cast<Conv2D*>(first)->b;
    double gt0 = 0.0;
    for (size_t i = 0; i < grad.size(); ++i) {
      const size_t j = i % n_feat;
      gt0 += grad.v[i] * (dalpha * (y0.v[i] - b[j]) + dgamma * coupling[j]);
    }
    extra->t0 += gt0;
  }

  // Standard backward with alpha-scaled deltas handles the data term.
  Tensor scaled = grad;
  for (double& v : scaled.v) v *= a;
  first->backward(caches[0], scaled, grad_in);

  // Correct the bias grads (dh/db = 1, not alpha) and add the mu coupling.
  if (first->kind() == LayerKind::Dense) {
    auto* d = static_cast<Dense*>(first);
    for (int j = 0; j < d->out_dim; ++j) {
      d->gb[j] += (1.0 - a) * delta_sum[j];
      const double c = g * delta_sum[j];
      double* gw = &d->gW.v[static_cast<size_t>(j) * d->in_dim];
      for (int i = 0; i < d->in_dim; ++i) gw[i] += c * model.prior_mean[i];
    }
  } else {
    auto* c2 = static_cast<Conv2D*>(first);
    std::vector<double> mu_bar(c2->in_c, 0.0);
    const size_t positions = model.prior_mean.size() / c2->in_c;
    for (size_t i = 0; i < positions; ++i)
      for (int ch = 0; ch < c2->in_c; ++ch) mu_bar[ch] += model.prior_mean[i * c2->in_c + ch];
    for (double& m : mu_bar) m /= static_cast<double>(positions);
    const int taps = c2->k * c2->k * c2->in_c;
    for (int o = 0; o < c2->out_c; ++o) {
      c2->gb[o] += (1.0 - a) * delta_sum[o];
      const double cg = g * delta_sum[o];
      double* gw = &c2->gW.v[static_cast<size_t>(o) * taps];
      for (int tp = 0; tp < taps; ++tp) gw[tp] += cg * mu_bar[tp % c2->in_c];
    }
  }
  return loss;
}

void zero_grads(Network& net) {
  for (auto& l : net.layers)
    for (Tensor* gptr : l->grads()) gptr->fill(0.0);
}

void sgd_step(Network& net, double lr, double wd, double inv_n) {
  for (auto& l : net.layers) {
    auto ps = l->params();
    auto gs = l->grads();
    for (size_t p = 0; p < ps.size(); ++p) {
      const bool decay = l->decays(p);
      for (size_t i = 0; i < ps[p]->size(); ++i) {
        double g = gs[p]->v[i] * inv_n;
        if (decay) g += wd * ps[p]->v[i];
        ps[p]->v[i] -= lr * g;
      }
    }
  }
}

double sample_ppp(const TrainConfig& cfg, uint64_t seed, uint32_t epoch, uint32_t item,
                  int which) {
  RngStream rng(seed, RngLane::Exposure, epoch, item);
  double u = 0.0;
  for (int i = 0; i <= which; ++i) u = rng.uniform();
  return std::exp(std::log(cfg.ppp_min) + u * (std::log(cfg.ppp_max) - std::log(cfg.ppp_min)));
}

// Shared SGD loop over (image, exposure) samples.
void run_training(AdaptedNetwork& model, InputMode mode, double anchor_ppp,
                  const std::vector<IntensityImage>& data, const TrainConfig& cfg,
                  const NoiseConfig& noise, TrainReport* report) {
  const size_t n = data.size();
  const int exposures = mode == InputMode::FixedAnchor ? 1 : cfg.exposures_per_image;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Layer::Cache> caches;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle(cfg.seed, RngLane::Shuffle, static_cast<uint32_t>(epoch));
    for (size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle.below(i)]);

    double epoch_loss = 0.0;
    size_t epoch_samples = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t stop = std::min(n, start + cfg.batch_size);
      zero_grads(model.core);
      SampleGrad extra;
      double batch_loss = 0.0;
      size_t batch_samples = 0;
      for (size_t bi = start; bi < stop; ++bi) {
        const size_t idx = order[bi];
        const IntensityImage& img = data[idx];
        for (int e = 0; e < exposures; ++e) {
          const double ppp = mode == InputMode::FixedAnchor
                                 ? anchor_ppp
                                 : sample_ppp(cfg, cfg.seed, epoch, static_cast<uint32_t>(idx), e);
          const uint64_t sample_seed =
              mix_seed(cfg.seed, (static_cast<uint64_t>(epoch) * n + idx) * 8 + e);
          const CountImage counts = simulate_counts(img, noise, ppp, sample_seed);
          batch_loss += train_sample(model, mode, counts, ppp, img.label, caches,
                                     mode == InputMode::Adapted ? &extra : nullptr);
          ++batch_samples;
        }
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch starting at " +
                                 std::to_string(start));
      const double inv_n = 1.0 / static_cast<double>(batch_samples);
      sgd_step(model.core, cfg.learning_rate, cfg.weight_decay, inv_n);
      if (mode == InputMode::Adapted) {
        model.prior_strength -= cfg.learning_rate * extra.t0 * inv_n;
        model.prior_strength = std::max(kT0Floor, model.prior_strength);
      }
      epoch_loss += batch_loss;
      epoch_samples += batch_samples;
    }
    if (report) {
      report->epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_samples));
      if (mode == InputMode::Adapted) report->t0_trace.push_back(model.prior_strength);
    }
  }
}

void check_dataset(const std::vector<IntensityImage>& data) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  int lo = data[0].label, hi = data[0].label;
  for (const auto& img : data) {
    if (img.label < 0) throw std::invalid_argument("train: unlabeled image");
    lo = std::min(lo, img.label);
    hi = std::max(hi, img.label);
  }
  if (lo == hi) throw std::invalid_argument("train: needs at least 2 classes");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate <= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
  if (epochs < 1) throw std::invalid_argument("train: epochs < 1");
  if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay < 0");
  if (exposures_per_image < 1) throw std::invalid_argument("train: exposures_per_image < 1");
  if (!(ppp_min > 0.0) || !(ppp_min < ppp_max))
    throw std::invalid_argument("train: need 0 < ppp_min < ppp_max");
}

Network build_network(ArchKind kind, int height, int width, int channels, int classes) {
  Network net;
  if (kind == ArchKind::Mlp) {
    net.input_shape = {height * width * channels};
    net.layers.push_back(std::make_unique<Dense>(height * width * channels, 64));
    net.layers.push_back(std::make_unique<ReLU>());
    net.layers.push_back(std::make_unique<Dense>(64, classes));
    return net;
  }
  net.input_shape = {height, width, channels};
  net.layers.push_back(std::make_unique<Conv2D>(channels, 8, 5));
  net.layers.push_back(std::make_unique<ReLU>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  net.layers.push_back(std::make_unique<Conv2D>(8, 16, 5));
  net.layers.push_back(std::make_unique<ReLU>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  auto shape = net.shape_after(net.layers.size());
  const int flat = static_cast<int>(Tensor::count(shape));
  net.layers.push_back(std::make_unique<Dense>(flat, 128));
  net.layers.push_back(std::make_unique<ReLU>());
  net.layers.push_back(std::make_unique<Dense>(128, classes));
  return net;
}

std::vector<double> mean_intensity(const std::vector<IntensityImage>& data) {
  std::vector<double> mean(data[0].pixels.size(), 0.0);
  for (const auto& img : data) {
    if (img.pixels.size() != mean.size())
      throw std::invalid_argument("mean_intensity: inconsistent image sizes");
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += img.pixels[i];
  }
  for (double& m : mean) m /= static_cast<double>(data.size());
  return mean;
}

double adapted_loss_grad(AdaptedNetwork& model, const CountImage& counts, double ppp,
                         int label, double* t0_grad) {
  std::vector<Layer::Cache> caches;
  SampleGrad extra;
  const double loss =
      train_sample(model, InputMode::Adapted, counts, ppp, label, caches, &extra);
  if (t0_grad) *t0_grad += extra.t0;
  return loss;
}

AdaptedNetwork train_posterior(const std::vector<IntensityImage>& data,
                               const TrainConfig& cfg, const NoiseConfig& noise,
                               ArchKind arch, TrainReport* report) {
  cfg.validate();
  noise.validate();
  check_dataset(data);

  const IntensityImage& ref = data[0];
  int classes = 0;
  for (const auto& img : data) classes = std::max(classes, img.label + 1);

  AdaptedNetwork model;
  model.core = build_network(arch, ref.height, ref.width, ref.channels, classes);
  init_weights(model.core, cfg.seed);
  model.count_scale = cfg.ppp_max;
  model.reference_exposure = cfg.ppp_max;  // model clock: one bin per unit PPP
  model.prior_strength = 1.0;

  // mu: mean training intensity through pixel_rate, per model bin, on the
  // network's normalized input scale.
  const std::vector<double> mean_img = mean_intensity(data);
  model.prior_mean = Tensor({static_cast<int>(mean_img.size())});
  for (size_t i = 0; i < mean_img.size(); ++i)
    model.prior_mean.v[i] =
        pixel_rate(mean_img[i], noise) / noise.illuminance / model.count_scale;

  run_training(model, InputMode::Adapted, 0.0, data, cfg, noise, report);
  return model;
}

Network train_rate(const std::vector<IntensityImage>& data, const TrainConfig& cfg,
                   const NoiseConfig& noise, ArchKind arch, TrainReport* report) {
  cfg.validate();
  noise.validate();
  check_dataset(data);
  const IntensityImage& ref = data[0];
  int classes = 0;
  for (const auto& img : data) classes = std::max(classes, img.label + 1);

  AdaptedNetwork shell;
  shell.core = build_network(arch, ref.height, ref.width, ref.channels, classes);
  init_weights(shell.core, cfg.seed);
  run_training(shell, InputMode::Rate, 0.0, data, cfg, noise, report);
  return std::move(shell.core);
}

std::vector<Specialist> train_ensemble(const std::vector<IntensityImage>& data,
                                       const std::vector<double>& anchors,
                                       const TrainConfig& cfg, const NoiseConfig& noise,
                                       ArchKind arch, TrainReport* report) {
  if (anchors.empty()) throw std::invalid_argument("ensemble: no anchors");
  if (!std::is_sorted(anchors.begin(), anchors.end()))
    throw std::invalid_argument("ensemble: anchors must be ascending");
  cfg.validate();
  noise.validate();
  check_dataset(data);
  const IntensityImage& ref = data[0];
  int classes = 0;
  for (const auto& img : data) classes = std::max(classes, img.label + 1);

  std::vector<Specialist> out;
  for (size_t a = 0; a < anchors.size(); ++a) {
    AdaptedNetwork shell;
    shell.core = build_network(arch, ref.height, ref.width, ref.channels, classes);
    TrainConfig c = cfg;
    c.seed = mix_seed(cfg.seed, a + 1);
    init_weights(shell.core, c.seed);
    run_training(shell, InputMode::FixedAnchor, anchors[a], data, c, noise, report);
    out.push_back(Specialist{anchors[a], std::move(shell.core)});
  }
  return out;
}

}  // namespace scotopic
