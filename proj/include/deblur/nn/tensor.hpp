#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace deblur::nn {

// Dense batch-of-images tensor, channels-last (N, H, W, C), row-major.
template <typename T>
struct Tensor {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        v(static_cast<size_t>(n_) * h_ * w_ * c_, T(0)) {
    if (n_ < 0 || h_ < 0 || w_ < 0 || c_ < 0)
      throw std::invalid_argument("Tensor: negative dimension");
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.n, o.h, o.w, o.c); }

  size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(int in, int iy, int ix, int ic) {
    return v[((static_cast<size_t>(in) * h + iy) * w + ix) * c + ic];
  }
  const T& at(int in, int iy, int ix, int ic) const {
    return v[((static_cast<size_t>(in) * h + iy) * w + ix) * c + ic];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && h == o.h && w == o.w && c == o.c;
  }

  std::string shape_str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ", " + std::to_string(c) + ")";
  }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, h, w, c);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace deblur::nn
