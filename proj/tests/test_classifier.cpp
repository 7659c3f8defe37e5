#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scotopic/classifier.hpp"
#include "scotopic/train.hpp"

using namespace scotopic;
using scotopic::testing::central_diff;
using scotopic::testing::grad_close;

namespace {

// Tiny adapted network: dense 4 -> 3 -> relu -> dense 3 -> 2.
AdaptedNetwork tiny_adapted(uint64_t seed, double t0 = 1.0, double T = 9.0) {
  AdaptedNetwork net;
  net.core.input_shape = {4};
  net.core.layers.push_back(std::make_unique<Dense>(4, 3));
  net.core.layers.push_back(std::make_unique<ReLU>());
  net.core.layers.push_back(std::make_unique<Dense>(3, 2));
  init_weights(net.core, seed);
  // nonzero biases so the beta identity is non-trivial
  auto* d0 = static_cast<Dense*>(net.core.layers[0].get());
  RngStream rng(seed, RngLane::Sample, 1);
  for (double& b : d0->b.v) b = 0.3 * rng.normal();
  net.prior_mean = Tensor({4}, {0.05, 0.02, 0.08, 0.03});
  net.prior_strength = t0;
  net.reference_exposure = T;
  net.count_scale = 1.0;
  return net;
}

CountImage make_counts(std::vector<double> v, int bins, double ppp) {
  CountImage c;
  c.height = 1;
  c.width = static_cast<int>(v.size());
  c.channels = 1;
  c.counts = std::move(v);
  c.num_bins = bins;
  c.ppp = ppp;
  return c;
}

}  // namespace

TEST_CASE("alpha is one at the reference exposure and decreasing") {
  AdaptedNetwork net = tiny_adapted(1);
  CHECK(net.alpha(net.reference_exposure) == 1.0);
  net.prior_strength = 1.0;
  net.reference_exposure = 9.0;
  CHECK(net.alpha(0.0) == doctest::Approx(10.0));
  double prev = net.alpha(0.0);
  for (double t = 1; t <= 40; t += 1) {
    CHECK(net.alpha(t) < prev);
    prev = net.alpha(t);
  }
}

TEST_CASE("beta reduces to the bias at t = T and when mu = 0") {
  AdaptedNetwork net = tiny_adapted(2);
  const auto* d0 = static_cast<const Dense*>(net.core.layers[0].get());
  const auto bT = net.beta(net.reference_exposure);
  for (size_t j = 0; j < bT.size(); ++j) CHECK(bT[j] == d0->b[j]);

  AdaptedNetwork zero_mu = tiny_adapted(2);
  zero_mu.prior_mean.fill(0.0);
  for (double t : {0.0, 1.0, 5.0, 20.0}) {
    const auto b = zero_mu.beta(t);
    for (size_t j = 0; j < b.size(); ++j)
      CHECK(b[j] == doctest::Approx(d0->b[j]).epsilon(1e-12));
  }
}

TEST_CASE("beta scalar hand example") {
  // W = 1, b = 0, mu = 1, t0 = 1, T = 4, t = 1 -> beta = 1*3/2*1 = 1.5
  AdaptedNetwork net;
  net.core.input_shape = {1};
  net.core.layers.push_back(std::make_unique<Dense>(1, 1));
  auto* d = static_cast<Dense*>(net.core.layers[0].get());
  d->W.v = {1.0};
  d->b.v = {0.0};
  net.prior_mean = Tensor({1}, {1.0});
  net.prior_strength = 1.0;
  net.reference_exposure = 4.0;
  CHECK(net.beta(1.0)[0] == doctest::Approx(1.5));
}

TEST_CASE("forward_adapted at t = T equals the plain pass") {
  AdaptedNetwork net = tiny_adapted(3);
  const CountImage counts = make_counts({3, 0, 7, 2}, 9, 9.0);
  const ClassPosterior adapted = net.forward_adapted(counts);
  Tensor x({4}, {3, 0, 7, 2});
  const ClassPosterior plain = net.forward_plain(x);
  for (size_t c = 0; c < adapted.probabilities.size(); ++c) {
    CHECK(adapted.probabilities[c] ==
          doctest::Approx(plain.probabilities[c]).epsilon(1e-6));
    CHECK(adapted.log_ratios[c] == doctest::Approx(plain.log_ratios[c]).epsilon(1e-6));
  }
}

TEST_CASE("zero counts at t = 0 predict from the prior mean alone") {
  AdaptedNetwork net = tiny_adapted(4);
  const CountImage zeros = make_counts({0, 0, 0, 0}, 0, 0.0);
  const ClassPosterior from_prior = net.forward_adapted_at(zeros, 0.0);
  Tensor mu_T({4});
  for (int i = 0; i < 4; ++i) mu_T.v[i] = net.prior_mean[i] * net.reference_exposure;
  const ClassPosterior plain = net.forward_plain(mu_T);
  for (size_t c = 0; c < 2; ++c)
    CHECK(from_prior.probabilities[c] ==
          doctest::Approx(plain.probabilities[c]).epsilon(1e-9));
}

TEST_CASE("adaptation is time-dependent, rate normalization is not") {
  AdaptedNetwork net = tiny_adapted(5);
  const CountImage n1 = make_counts({2, 1, 4, 0}, 3, 3.0);
  const CountImage n2 = make_counts({4, 2, 8, 0}, 6, 6.0);
  const ClassPosterior a1 = net.forward_adapted(n1);
  const ClassPosterior a2 = net.forward_adapted(n2);
  bool differs = false;
  for (size_t c = 0; c < 2; ++c)
    differs = differs || std::abs(a1.log_ratios[c] - a2.log_ratios[c]) > 1e-6;
  CHECK(differs);

  const ClassPosterior r1 = forward_rate(n1, net.core);
  const ClassPosterior r2 = forward_rate(n2, net.core);
  for (size_t c = 0; c < 2; ++c)
    CHECK(r1.probabilities[c] == doctest::Approx(r2.probabilities[c]).epsilon(1e-12));

  const CountImage t0 = make_counts({0, 0, 0, 0}, 0, 0.0);
  CHECK_THROWS(forward_rate(t0, net.core));
}

TEST_CASE("forward_adapted is continuous in exposure") {
  AdaptedNetwork net = tiny_adapted(6);
  const CountImage counts = make_counts({1, 2, 0, 3}, 4, 4.0);
  // refinement check: the largest step shrinks linearly with the step size,
  // which a jump would not allow
  auto max_step = [&](double dt) {
    double prev = net.forward_adapted_at(counts, 0.5).log_ratios[0];
    double worst = 0.0;
    for (double t = 0.5 + dt; t < 12.0; t += dt) {
      const double cur = net.forward_adapted_at(counts, t).log_ratios[0];
      worst = std::max(worst, std::abs(cur - prev));
      prev = cur;
    }
    return worst;
  };
  const double coarse = max_step(0.01);
  const double fine = max_step(0.001);
  CHECK(fine <= coarse / 5.0);
  CHECK(coarse < 1.0);
}

TEST_CASE("posterior bookkeeping stays consistent") {
  for (auto logits : {std::vector<double>{0.1, -3.0, 2.2},
                      std::vector<double>{100.0, -100.0, 0.0},
                      std::vector<double>{-1e4, -1e4, -1e4}}) {
    const ClassPosterior p = posterior_from_logits(logits);
    double s = 0.0;
    int argmax_p = 0;
    for (size_t i = 0; i < p.probabilities.size(); ++i) {
      s += p.probabilities[i];
      CHECK(std::isfinite(p.log_ratios[i]));
      if (p.probabilities[i] > p.probabilities[argmax_p]) argmax_p = static_cast<int>(i);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.argmax() == argmax_p);
  }
}

TEST_CASE("ensemble routes by log distance with ties toward the lower anchor") {
  Ensemble ens;
  for (double anchor : {2.2, 22.0}) {
    Specialist s;
    s.anchor_ppp = anchor;
    s.net.input_shape = {2};
    s.net.layers.push_back(std::make_unique<Dense>(2, 2));
    init_weights(s.net, static_cast<uint64_t>(anchor * 10));
    ens.members.push_back(std::move(s));
  }
  CHECK(ens.route(5.0) == 0);   // |log 5 - log 2.2| < |log 5 - log 22|
  CHECK(ens.route(21.0) == 1);
  const double midpoint = std::sqrt(2.2 * 22.0);
  CHECK(ens.route(midpoint) == 0);  // tie -> lower anchor
}

TEST_CASE("photopic rescales counts to the bright anchor") {
  Specialist bright;
  bright.anchor_ppp = 220.0;
  bright.net.input_shape = {3};
  bright.net.layers.push_back(std::make_unique<Dense>(3, 2));
  init_weights(bright.net, 8);

  const CountImage at220 = make_counts({100, 50, 10}, 1000, 220.0);
  const ClassPosterior direct = bright.forward_scaled(at220);
  const ClassPosterior via = forward_photopic(at220, bright);
  for (size_t c = 0; c < 2; ++c)
    CHECK(via.probabilities[c] == doctest::Approx(direct.probabilities[c]).epsilon(1e-12));

  // at PPP 22 the counts are scaled by 10 before the pass
  const CountImage at22 = make_counts({10, 5, 1}, 100, 22.0);
  const ClassPosterior low = forward_photopic(at22, bright);
  const CountImage scaled = rescale_counts(at22, 10.0);
  const ClassPosterior manual = bright.forward_scaled(scaled);
  for (size_t c = 0; c < 2; ++c)
    CHECK(low.probabilities[c] == doctest::Approx(manual.probabilities[c]).epsilon(1e-12));

  const CountImage empty = make_counts({0, 0, 0}, 0, 0.0);
  CHECK_THROWS(forward_photopic(empty, bright));
}

TEST_CASE("training gradients match finite differences through the adaptation") {
  for (double t : {0.7, 4.0, 9.0, 25.0}) {
    AdaptedNetwork net = tiny_adapted(41, 1.3, 9.0);
    const CountImage counts = make_counts({2, 0, 5, 1}, static_cast<int>(t), t);
    const int label = 1;

    for (auto& l : net.core.layers)
      for (Tensor* g : l->grads()) g->fill(0.0);
    double t0_grad = 0.0;
    adapted_loss_grad(net, counts, t, label, &t0_grad);

    auto loss_eval = [&]() {
      const ClassPosterior p = net.forward_adapted_at(counts, t);
      return -std::log(std::max(p.probabilities[label], 1e-300));
    };

    for (auto& l : net.core.layers) {
      auto ps = l->params();
      auto gs = l->grads();
      for (size_t p = 0; p < ps.size(); ++p)
        for (size_t i = 0; i < ps[p]->size(); ++i) {
          const double numeric = central_diff(loss_eval, ps[p]->v[i]);
          CHECK_MESSAGE(grad_close(gs[p]->v[i], numeric),
                        "t=", t, " param ", p, " i ", i, " analytic ", gs[p]->v[i],
                        " numeric ", numeric);
        }
    }
    const double numeric_t0 = central_diff(loss_eval, net.prior_strength);
    CHECK_MESSAGE(grad_close(t0_grad, numeric_t0), "t0 grad analytic ", t0_grad,
                  " numeric ", numeric_t0);
  }
}

TEST_CASE("training gradients also hold for a convolutional first layer") {
  AdaptedNetwork net;
  net.core.input_shape = {6, 6, 1};
  net.core.layers.push_back(std::make_unique<Conv2D>(1, 2, 3));
  net.core.layers.push_back(std::make_unique<ReLU>());
  net.core.layers.push_back(std::make_unique<MaxPool2>());
  net.core.layers.push_back(std::make_unique<Dense>(8, 2));
  init_weights(net.core, 55);
  auto* c0 = static_cast<Conv2D*>(net.core.layers[0].get());
  RngStream rng(56, RngLane::Sample);
  for (double& b : c0->b.v) b = 0.2 * rng.normal();
  net.prior_mean = Tensor({36});
  for (double& m : net.prior_mean.v) m = 0.04 + 0.02 * rng.uniform();
  net.prior_strength = 0.8;
  net.reference_exposure = 12.0;
  net.count_scale = 1.0;

  CountImage counts;
  counts.height = counts.width = 6;
  counts.channels = 1;
  counts.num_bins = 5;
  counts.ppp = 5.0;
  counts.counts.resize(36);
  for (double& v : counts.counts) v = static_cast<double>(rng.below(4));

  for (auto& l : net.core.layers)
    for (Tensor* g : l->grads()) g->fill(0.0);
  double t0_grad = 0.0;
  adapted_loss_grad(net, counts, 5.0, 0, &t0_grad);

  auto loss_eval = [&]() {
    const ClassPosterior p = net.forward_adapted_at(counts, 5.0);
    return -std::log(std::max(p.probabilities[0], 1e-300));
  };
  for (auto& l : net.core.layers) {
    auto ps = l->params();
    auto gs = l->grads();
    for (size_t p = 0; p < ps.size(); ++p)
      for (size_t i = 0; i < ps[p]->size(); ++i) {
        const double numeric = central_diff(loss_eval, ps[p]->v[i]);
        CHECK_MESSAGE(grad_close(gs[p]->v[i], numeric), "conv param ", p, " i ", i,
                      " analytic ", gs[p]->v[i], " numeric ", numeric);
      }
  }
  CHECK(grad_close(t0_grad, central_diff(loss_eval, net.prior_strength)));
}

TEST_CASE("a small two-class training run reduces the loss") {
  // 200-image toy set: class 0 bright on the left, class 1 bright on the right.
  std::vector<IntensityImage> data;
  RngStream rng(99, RngLane::Dataset);
  for (int i = 0; i < 200; ++i) {
    IntensityImage img;
    img.height = 4;
    img.width = 4;
    img.channels = 1;
    img.label = i % 2;
    img.pixels.assign(16, 0.05);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 2; ++x) {
        const int col = img.label == 0 ? x : 3 - x;
        img.pixels[y * 4 + col] = 0.6 + 0.3 * rng.uniform();
      }
    data.push_back(std::move(img));
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.batch_size = 50;
  cfg.epochs = 20;
  cfg.exposures_per_image = 2;
  cfg.ppp_min = 2.0;
  cfg.ppp_max = 50.0;
  cfg.seed = 5;
  NoiseConfig noise;
  noise.dark_current = 0.03;
  noise.read_noise_std = 0.0;
  noise.fpn_std = 0.0;
  TrainReport report;
  const AdaptedNetwork net = train_posterior(data, cfg, noise, ArchKind::Mlp, &report);
  REQUIRE(report.epoch_loss.size() == 20);
  for (int e = 0; e + 1 < 5; ++e) CHECK(report.epoch_loss[e + 1] < report.epoch_loss[e]);
  CHECK(net.prior_strength > 0.0);

  CHECK_THROWS(train_posterior({}, cfg, noise, ArchKind::Mlp, nullptr));
  std::vector<IntensityImage> one_class(data.begin(), data.begin() + 2);
  one_class[1].label = one_class[0].label;
  CHECK_THROWS(train_posterior(one_class, cfg, noise, ArchKind::Mlp, nullptr));
}
