#include "scotopic/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scotopic {

void Layer::forward_train(const Tensor& in, Tensor& out, Cache& cache) const {
  cache.in = in;
  forward(in, out);
}

// ---- Dense ------------------------------------------------------------------

Dense::Dense(int in_d, int out_d)
    : in_dim(in_d), out_dim(out_d),
      W({out_d, in_d}), b({out_d}), gW({out_d, in_d}), gb({out_d}) {}

std::vector<int> Dense::out_shape(const std::vector<int>& in) const {
  if (static_cast<int>(Tensor::count(in)) != in_dim)
    throw std::invalid_argument("dense: input dimension mismatch");
  return {out_dim};
}

void Dense::forward(const Tensor& in, Tensor& out) const {
  if (static_cast<int>(in.size()) != in_dim)
    throw std::invalid_argument("dense: input dimension mismatch");
  out = Tensor({out_dim});
  for (int o = 0; o < out_dim; ++o) {
    const double* w = &W.v[static_cast<size_t>(o) * in_dim];
    double acc = b[o];
    for (int i = 0; i < in_dim; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
}

void Dense::backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) {
  grad_in = Tensor(cache.in.shape);
  for (int o = 0; o < out_dim; ++o) {
    const double g = grad_out[o];
    gb[o] += g;
    double* gw = &gW.v[static_cast<size_t>(o) * in_dim];
    const double* w = &W.v[static_cast<size_t>(o) * in_dim];
    for (int i = 0; i < in_dim; ++i) {
      gw[i] += g * cache.in[i];
      grad_in[i] += g * w[i];
    }
  }
}

std::unique_ptr<Layer> Dense::clone() const {
  auto c = std::make_unique<Dense>(in_dim, out_dim);
  c->W = W;
  c->b = b;
  return c;
}

size_t Dense::forward_mults(const std::vector<int>&) const {
  return static_cast<size_t>(in_dim) * out_dim;
}

// ---- Conv2D -----------------------------------------------------------------

Conv2D::Conv2D(int in_channels, int out_channels, int kernel)
    : in_c(in_channels), out_c(out_channels), k(kernel),
      W({out_channels, kernel, kernel, in_channels}),
      b({out_channels}),
      gW({out_channels, kernel, kernel, in_channels}),
      gb({out_channels}) {}

std::vector<int> Conv2D::out_shape(const std::vector<int>& in) const {
  if (in.size() != 3 || in[2] != in_c || in[0] < k || in[1] < k)
    throw std::invalid_argument("conv: bad input shape");
  return {in[0] - k + 1, in[1] - k + 1, out_c};
}

void Conv2D::forward(const Tensor& in, Tensor& out) const {
  const auto os = out_shape(in.shape);
  const int iw = in.shape[1];
  const int oh = os[0], ow = os[1];
  const int taps = k * k * in_c;
  out = Tensor(os);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* dst = &out.v[(static_cast<size_t>(oy) * ow + ox) * out_c];
      for (int o = 0; o < out_c; ++o) {
        const double* w = &W.v[static_cast<size_t>(o) * taps];
        double acc = b[o];
        for (int ky = 0; ky < k; ++ky) {
          const double* row = &in.v[(static_cast<size_t>(oy + ky) * iw + ox) * in_c];
          const double* wr = w + static_cast<size_t>(ky) * k * in_c;
          for (int t = 0; t < k * in_c; ++t) acc += wr[t] * row[t];
        }
        dst[o] = acc;
      }
    }
  }
}

void Conv2D::backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) {
  const Tensor& in = cache.in;
  const int iw = in.shape[1];
  const int oh = grad_out.shape[0], ow = grad_out.shape[1];
  grad_in = Tensor(in.shape);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* g = &grad_out.v[(static_cast<size_t>(oy) * ow + ox) * out_c];
      for (int o = 0; o < out_c; ++o) gb[o] += g[o];
      for (int ky = 0; ky < k; ++ky) {
        const size_t in_row = (static_cast<size_t>(oy + ky) * iw + ox) * in_c;
        for (int kx = 0; kx < k; ++kx) {
          for (int c = 0; c < in_c; ++c) {
            const size_t ii = in_row + static_cast<size_t>(kx) * in_c + c;
            const double x = in.v[ii];
            double acc = 0.0;
            const size_t wbase = (static_cast<size_t>(ky) * k + kx) * in_c + c;
            for (int o = 0; o < out_c; ++o) {
              const size_t wi = static_cast<size_t>(o) * k * k * in_c + wbase;
              gW.v[wi] += g[o] * x;
              acc += g[o] * W.v[wi];
            }
            grad_in.v[ii] += acc;
          }
        }
      }
    }
  }
}

std::unique_ptr<Layer> Conv2D::clone() const {
  auto c = std::make_unique<Conv2D>(in_c, out_c, k);
  c->W = W;
  c->b = b;
  return c;
}

size_t Conv2D::forward_mults(const std::vector<int>& in_shape) const {
  const auto os = out_shape(in_shape);
  return static_cast<size_t>(os[0]) * os[1] * out_c * k * k * in_c;
}

// ---- ReLU -------------------------------------------------------------------

void ReLU::forward(const Tensor& in, Tensor& out) const {
  out = in;
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
}

void ReLU::backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) {
  grad_in = grad_out;
  for (size_t i = 0; i < grad_in.size(); ++i)
    if (cache.in[i] <= 0.0) grad_in[i] = 0.0;
}

// ---- MaxPool2 ---------------------------------------------------------------

std::vector<int> MaxPool2::out_shape(const std::vector<int>& in) const {
  if (in.size() != 3 || in[0] % 2 != 0 || in[1] % 2 != 0)
    throw std::invalid_argument("maxpool: needs (even h, even w, c) input");
  return {in[0] / 2, in[1] / 2, in[2]};
}

void MaxPool2::pool(const Tensor& in, Tensor& out, std::vector<int>* idx) const {
  const auto os = out_shape(in.shape);
  const int iw = in.shape[1], ch = in.shape[2];
  const int oh = os[0], ow = os[1];
  out = Tensor(os);
  if (idx) idx->assign(out.size(), 0);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int c = 0; c < ch; ++c) {
        double best = -1e300;
        int best_i = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int ii = ((oy * 2 + dy) * iw + (ox * 2 + dx)) * ch + c;
            if (in.v[ii] > best) {
              best = in.v[ii];
              best_i = ii;
            }
          }
        }
        const size_t oi = (static_cast<size_t>(oy) * ow + ox) * ch + c;
        out.v[oi] = best;
        if (idx) (*idx)[oi] = best_i;
      }
    }
  }
}

void MaxPool2::forward(const Tensor& in, Tensor& out) const { pool(in, out, nullptr); }

void MaxPool2::forward_train(const Tensor& in, Tensor& out, Cache& cache) const {
  cache.in = in;
  pool(in, out, &cache.idx);
}

void MaxPool2::backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) {
  grad_in = Tensor(cache.in.shape);
  for (size_t oi = 0; oi < grad_out.size(); ++oi)
    grad_in.v[cache.idx[oi]] += grad_out.v[oi];
}

// ---- Network ----------------------------------------------------------------

Network Network::clone() const {
  Network c;
  c.input_shape = input_shape;
  c.layers.reserve(layers.size());
  for (const auto& l : layers) c.layers.push_back(l->clone());
  return c;
}

Tensor Network::forward(const Tensor& x) const { return forward_from(0, x); }

Tensor Network::forward_from(size_t first, const Tensor& x) const {
  Tensor cur = x;
  Tensor next;
  for (size_t i = first; i < layers.size(); ++i) {
    layers[i]->forward(cur, next);
    std::swap(cur, next);
  }
  return cur;
}

std::vector<int> Network::shape_after(size_t layer_count) const {
  std::vector<int> s = input_shape;
  for (size_t i = 0; i < layer_count; ++i) s = layers[i]->out_shape(s);
  return s;
}

int Network::num_classes() const {
  return static_cast<int>(Tensor::count(shape_after(layers.size())));
}

size_t Network::dense_mults() const {
  size_t total = 0;
  std::vector<int> s = input_shape;
  for (const auto& l : layers) {
    total += l->forward_mults(s);
    s = l->out_shape(s);
  }
  return total;
}

size_t Network::param_count() const {
  size_t n = 0;
  for (const auto& l : layers)
    for (Tensor* p : const_cast<Layer*>(l.get())->params()) n += p->size();
  return n;
}

void init_weights(Network& net, uint64_t seed, double first_layer_scale) {
  uint32_t layer_idx = 0;
  bool first = true;
  for (auto& l : net.layers) {
    auto ps = l->params();
    if (ps.empty()) {
      ++layer_idx;
      continue;
    }
    int fan_in = 0;
    if (l->kind() == LayerKind::Dense) fan_in = static_cast<Dense*>(l.get())->in_dim;
    if (l->kind() == LayerKind::Conv2D) {
      auto* c = static_cast<Conv2D*>(l.get());
      fan_in = c->in_c * c->k * c->k;
    }
    double std_dev = std::sqrt(2.0 / fan_in);
    if (first) std_dev /= first_layer_scale;
    RngStream rng(seed, RngLane::WeightInit, layer_idx);
    for (double& w : ps[0]->v) w = std_dev * rng.normal();
    ps[1]->fill(0.0);
    first = false;
    ++layer_idx;
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double softmax_nll(const Tensor& logits, int label, Tensor* grad) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw std::invalid_argument("softmax_nll: label out of range");
  const std::vector<double> p = softmax(logits.v);
  if (grad) {
    *grad = Tensor(logits.shape);
    for (size_t i = 0; i < p.size(); ++i) grad->v[i] = p[i];
    grad->v[label] -= 1.0;
  }
  return -std::log(std::max(p[label], 1e-300));
}

}  // namespace scotopic
