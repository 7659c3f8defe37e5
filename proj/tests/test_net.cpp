#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scotopic/net.hpp"

using namespace scotopic;
using scotopic::testing::central_diff;
using scotopic::testing::grad_close;

TEST_CASE("dense forward computes W x + b") {
  Dense d(3, 2);
  d.W.v = {1, 2, 3, 4, 5, 6};
  d.b.v = {0.5, -0.5};
  Tensor x({3}, {1, 0, 2});
  Tensor y;
  d.forward(x, y);
  CHECK(y.v[0] == doctest::Approx(1 + 6 + 0.5));
  CHECK(y.v[1] == doctest::Approx(4 + 12 - 0.5));
}

TEST_CASE("conv forward matches a hand-computed window") {
  Conv2D c(1, 1, 2);
  c.W.v = {1, 2, 3, 4};  // [ky][kx] for one map
  c.b.v = {1.0};
  Tensor x({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor y;
  c.forward(x, y);
  REQUIRE(y.shape == std::vector<int>({2, 2, 1}));
  // window at (0,0): 1*1 + 2*2 + 3*4 + 4*5 + 1 = 38
  CHECK(y.v[0] == doctest::Approx(38));
  // window at (1,1): 1*5 + 2*6 + 3*8 + 4*9 + 1 = 78
  CHECK(y.v[3] == doctest::Approx(78));
}

TEST_CASE("maxpool picks window maxima") {
  MaxPool2 p;
  Tensor x({2, 4, 1}, {1, 5, 2, 0, 3, 4, 7, 1});
  Tensor y;
  p.forward(x, y);
  REQUIRE(y.shape == std::vector<int>({1, 2, 1}));
  CHECK(y.v[0] == 5);
  CHECK(y.v[1] == 7);
}

TEST_CASE("softmax probabilities and nll gradient") {
  Tensor logits({3}, {1.0, 2.0, 0.5});
  Tensor grad;
  const double loss = softmax_nll(logits, 1, &grad);
  const auto p = softmax(logits.v);
  CHECK(loss == doctest::Approx(-std::log(p[1])));
  CHECK(grad.v[0] == doctest::Approx(p[0]));
  CHECK(grad.v[1] == doctest::Approx(p[1] - 1.0));
  double s = 0.0;
  for (double v : p) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}

namespace {

// Backprop vs central differences on every parameter of a small network.
void gradcheck_network(Network& net, const Tensor& x, int label) {
  // analytic gradients
  std::vector<Layer::Cache> caches(net.layers.size());
  Tensor cur = x, next;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l]->forward_train(cur, next, caches[l]);
    std::swap(cur, next);
  }
  Tensor grad;
  softmax_nll(cur, label, &grad);
  Tensor gin;
  for (size_t l = net.layers.size(); l-- > 0;) {
    net.layers[l]->backward(caches[l], grad, gin);
    std::swap(grad, gin);
  }

  auto loss_eval = [&]() {
    Tensor out = net.forward(x);
    return softmax_nll(out, label, nullptr);
  };

  int checked = 0;
  for (auto& layer : net.layers) {
    auto ps = layer->params();
    auto gs = layer->grads();
    for (size_t p = 0; p < ps.size(); ++p) {
      for (size_t i = 0; i < ps[p]->size(); ++i) {
        const double numeric = central_diff(loss_eval, ps[p]->v[i]);
        CHECK_MESSAGE(grad_close(gs[p]->v[i], numeric),
                      "param ", p, " index ", i, " analytic ", gs[p]->v[i],
                      " numeric ", numeric);
        ++checked;
      }
    }
  }
  CHECK(checked > 0);
}

}  // namespace

TEST_CASE("gradients match finite differences on a dense network") {
  Network net;
  net.input_shape = {6};
  net.layers.push_back(std::make_unique<Dense>(6, 5));
  net.layers.push_back(std::make_unique<ReLU>());
  net.layers.push_back(std::make_unique<Dense>(5, 3));
  init_weights(net, 21);
  RngStream rng(3, RngLane::Sample);
  Tensor x({6});
  for (double& v : x.v) v = rng.uniform();
  gradcheck_network(net, x, 2);
}

TEST_CASE("gradients match finite differences on a conv network") {
  Network net;
  net.input_shape = {6, 6, 1};
  net.layers.push_back(std::make_unique<Conv2D>(1, 2, 3));
  net.layers.push_back(std::make_unique<ReLU>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  net.layers.push_back(std::make_unique<Dense>(2 * 2 * 2, 3));
  init_weights(net, 22);
  RngStream rng(4, RngLane::Sample);
  Tensor x({6, 6, 1});
  for (double& v : x.v) v = rng.uniform() + 0.05;  // keep relu off the kink
  gradcheck_network(net, x, 1);
}

TEST_CASE("weight init is deterministic and clone preserves weights") {
  Network a;
  a.input_shape = {4};
  a.layers.push_back(std::make_unique<Dense>(4, 3));
  init_weights(a, 77);
  Network b = a.clone();
  auto* da = static_cast<Dense*>(a.layers[0].get());
  auto* db = static_cast<Dense*>(b.layers[0].get());
  CHECK(da->W.v == db->W.v);
  CHECK(a.dense_mults() == 12);
}
