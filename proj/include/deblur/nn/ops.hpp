#pragma once

#include <cstdint>
#include <vector>

#include "deblur/architecture.hpp"
#include "deblur/nn/tensor.hpp"

namespace deblur::nn {

// TensorFlow-style "same" geometry: out = ceil(in / stride), padding split
// with the smaller half leading.
struct ConvGeom {
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  int kernel = 1, stride = 1;
  int pad_top = 0, pad_left = 0;
  PadMode pad = PadMode::Zero;
};

ConvGeom conv_geometry(int in_h, int in_w, int kernel, int stride, PadMode pad);

// Per-(output pixel, tap) source pixel index within one image plane,
// -1 for zero padding. Size: out_h * out_w * kernel^2.
std::vector<int32_t> conv_pixel_map(const ConvGeom& g);

template <typename T>
void conv2d_forward(const LayerSpec& spec, const Tensor<T>& weight,
                    const Tensor<T>& bias, const Tensor<T>& x, Tensor<T>& out);

// Accumulates into g_weight / g_bias; writes the input gradient to g_in.
template <typename T>
void conv2d_backward(const LayerSpec& spec, const Tensor<T>& weight,
                     const Tensor<T>& x, const Tensor<T>& g_out,
                     Tensor<T>& g_weight, Tensor<T>& g_bias, Tensor<T>& g_in);

template <typename T>
struct BnCache {
  std::vector<T> mean, istd;
  Tensor<T> xhat;
};

template <typename T>
void bn_forward_train(const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& run_mean,
                      Tensor<T>& run_var, double momentum, double eps,
                      bool update_running, Tensor<T>& out, BnCache<T>* cache);

template <typename T>
void bn_forward_eval(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, const Tensor<T>& run_mean,
                     const Tensor<T>& run_var, double eps, Tensor<T>& out);

template <typename T>
void bn_backward(const BnCache<T>& cache, const Tensor<T>& gamma,
                 const Tensor<T>& g_out, Tensor<T>& g_gamma, Tensor<T>& g_beta,
                 Tensor<T>& g_in);

template <typename T>
void activate_inplace(Activation act, Tensor<T>& x);

// y is the cached activation output; returns dL/d(pre-activation).
template <typename T>
Tensor<T> activation_backward(Activation act, const Tensor<T>& y,
                              const Tensor<T>& g_out);

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x);

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& g_out);

}  // namespace deblur::nn
