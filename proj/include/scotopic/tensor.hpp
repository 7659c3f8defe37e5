#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace scotopic {

// Dense row-major array of doubles. Small on purpose: shape bookkeeping plus
// flat storage is all the network and sensor code needs.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != count(shape)) throw std::invalid_argument("tensor: shape/data mismatch");
  }

  static size_t count(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  size_t size() const { return v.size(); }
  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace scotopic
