#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scotopic/rng.hpp"
#include "scotopic/tensor.hpp"

namespace scotopic {

enum class LayerKind { Dense, Conv2D, ReLU, MaxPool2 };

// One network layer. Inference (`forward`) is const and reentrant; the
// training path caches whatever backward needs in an externally owned Cache
// so a trained network can be shared across threads.
class Layer {
 public:
  struct Cache {
    Tensor in;
    std::vector<int> idx;  // maxpool argmax positions
  };

  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual std::vector<int> out_shape(const std::vector<int>& in) const = 0;
  virtual void forward(const Tensor& in, Tensor& out) const = 0;
  virtual void forward_train(const Tensor& in, Tensor& out, Cache& cache) const;
  // Accumulates parameter gradients and writes the input gradient.
  virtual void backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) = 0;

  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
  // Weight decay applies to filters only, never biases.
  virtual bool decays(size_t param_index) const { (void)param_index; return false; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  // Multiplication count of one dense forward pass (power accounting).
  virtual size_t forward_mults(const std::vector<int>& in_shape) const = 0;
};

// Fully connected y = W x + b; accepts any input shape, flattened.
class Dense : public Layer {
 public:
  Dense(int in_dim, int out_dim);
  LayerKind kind() const override { return LayerKind::Dense; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) override;
  std::vector<Tensor*> params() override { return {&W, &b}; }
  std::vector<Tensor*> grads() override { return {&gW, &gb}; }
  bool decays(size_t p) const override { return p == 0; }
  std::unique_ptr<Layer> clone() const override;
  size_t forward_mults(const std::vector<int>& in_shape) const override;

  int in_dim, out_dim;
  Tensor W;   // [out][in]
  Tensor b;   // [out]
  Tensor gW, gb;
};

// Valid 2D convolution, stride 1, square kernel, input (h, w, c_in) ->
// output (h-k+1, w-k+1, c_out).
class Conv2D : public Layer {
 public:
  Conv2D(int in_channels, int out_channels, int kernel);
  LayerKind kind() const override { return LayerKind::Conv2D; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) override;
  std::vector<Tensor*> params() override { return {&W, &b}; }
  std::vector<Tensor*> grads() override { return {&gW, &gb}; }
  bool decays(size_t p) const override { return p == 0; }
  std::unique_ptr<Layer> clone() const override;
  size_t forward_mults(const std::vector<int>& in_shape) const override;

  int in_c, out_c, k;
  Tensor W;   // [out_c][k][k][in_c]
  Tensor b;   // [out_c]
  Tensor gW, gb;
};

class ReLU : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  std::vector<int> out_shape(const std::vector<int>& in) const override { return in; }
  void forward(const Tensor& in, Tensor& out) const override;
  void backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(); }
  size_t forward_mults(const std::vector<int>&) const override { return 0; }
};

// 2x2 max pooling, stride 2; input (h, w, c) with even h, w.
class MaxPool2 : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::MaxPool2; }
  std::vector<int> out_shape(const std::vector<int>& in) const override;
  void forward(const Tensor& in, Tensor& out) const override;
  void forward_train(const Tensor& in, Tensor& out, Cache& cache) const override;
  void backward(const Cache& cache, const Tensor& grad_out, Tensor& grad_in) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(); }
  size_t forward_mults(const std::vector<int>&) const override { return 0; }

 private:
  void pool(const Tensor& in, Tensor& out, std::vector<int>* idx) const;
};

// A feedforward stack. The output layer produces raw logits; softmax and the
// posterior bookkeeping live in classifier.hpp.
struct Network {
  std::vector<int> input_shape;  // (h, w, c) or (d)
  std::vector<std::unique_ptr<Layer>> layers;

  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  Network clone() const;
  Tensor forward(const Tensor& x) const;
  // Run layers [first..end): the spiking runtime feeds reconstructed hidden
  // activations through the tail of the network.
  Tensor forward_from(size_t first, const Tensor& x) const;
  std::vector<int> shape_after(size_t layer_count) const;
  int num_classes() const;
  // Multiplications of one full dense pass (the power-accounting baseline).
  size_t dense_mults() const;
  size_t param_count() const;
};

// He-style seeded Gaussian init; `first_layer_scale` divides the first
// weight layer's std so count-scaled inputs land at unit-order activations.
void init_weights(Network& net, uint64_t seed, double first_layer_scale = 1.0);

// Softmax cross-entropy: returns -log p[label] and writes dL/dlogits.
double softmax_nll(const Tensor& logits, int label, Tensor* grad);

std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace scotopic
