#include "deblur/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "deblur/nn/gemm.hpp"

namespace deblur::nn {

namespace {

int reflect101(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

// Keep the im2col working set near the L2 size.
int64_t rows_per_chunk(int64_t kkc, size_t elem) {
  const int64_t budget = 8 << 20;
  return std::max<int64_t>(64, budget / std::max<int64_t>(1, kkc * static_cast<int64_t>(elem)));
}

}  // namespace

ConvGeom conv_geometry(int in_h, int in_w, int kernel, int stride, PadMode pad) {
  ConvGeom g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel = kernel;
  g.stride = stride;
  g.pad = pad;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const int pad_h = std::max(0, (g.out_h - 1) * stride + kernel - in_h);
  const int pad_w = std::max(0, (g.out_w - 1) * stride + kernel - in_w);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  if (pad == PadMode::Reflect) {
    // reflect-101 mirrors around the border pixel; each side's padding must
    // stay below the image extent
    const int pad_bottom = pad_h - g.pad_top;
    const int pad_right = pad_w - g.pad_left;
    if (std::max(g.pad_top, pad_bottom) >= in_h || std::max(g.pad_left, pad_right) >= in_w)
      throw std::invalid_argument("conv_geometry: input too small for reflection padding");
  }
  return g;
}

std::vector<int32_t> conv_pixel_map(const ConvGeom& g) {
  const int k = g.kernel;
  std::vector<int32_t> map(static_cast<size_t>(g.out_h) * g.out_w * k * k);
  size_t idx = 0;
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const int base_y = oy * g.stride - g.pad_top;
      const int base_x = ox * g.stride - g.pad_left;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          int sy = base_y + ky;
          int sx = base_x + kx;
          if (g.pad == PadMode::Reflect) {
            sy = reflect101(sy, g.in_h);
            sx = reflect101(sx, g.in_w);
            map[idx++] = sy * g.in_w + sx;
          } else {
            map[idx++] = (sy < 0 || sy >= g.in_h || sx < 0 || sx >= g.in_w)
                             ? -1
                             : sy * g.in_w + sx;
          }
        }
      }
    }
  }
  return map;
}

namespace {

template <typename T>
int64_t per_image_elems(const Tensor<T>& x) {
  return static_cast<int64_t>(x.h) * x.w * x.c;
}

// Gathers im2col rows [row0, row1) of the batch into `cols`
// (shape [row1-row0, k*k*c_in], tap-major, channel-minor).
template <typename T>
void im2col_rows(const Tensor<T>& x, const ConvGeom& g,
                 const std::vector<int32_t>& map, int64_t row0, int64_t row1,
                 T* cols) {
  const int64_t per_image = static_cast<int64_t>(g.out_h) * g.out_w;
  const int taps = g.kernel * g.kernel;
  const int cin = x.c;
  const int64_t kkc = static_cast<int64_t>(taps) * cin;
  parallel_for(row0, row1, 256, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const int64_t img = p / per_image;
      const int64_t pix = p % per_image;
      const T* src_img = x.data() + img * per_image_elems(x);
      const int32_t* m = map.data() + pix * taps;
      T* dst = cols + (p - row0) * kkc;
      for (int t = 0; t < taps; ++t) {
        const int32_t s = m[t];
        if (s >= 0)
          std::memcpy(dst + t * cin, src_img + static_cast<int64_t>(s) * cin,
                      sizeof(T) * cin);
        else
          std::memset(dst + t * cin, 0, sizeof(T) * cin);
      }
    }
  });
}

// Scatter-adds column gradients back onto the input. Serial: output windows
// overlap, and a fixed order keeps runs reproducible.
template <typename T>
void col2im_add_rows(Tensor<T>& g_in, const ConvGeom& g,
                     const std::vector<int32_t>& map, int64_t row0, int64_t row1,
                     const T* cols) {
  const int64_t per_image = static_cast<int64_t>(g.out_h) * g.out_w;
  const int taps = g.kernel * g.kernel;
  const int cin = g_in.c;
  const int64_t kkc = static_cast<int64_t>(taps) * cin;
  for (int64_t p = row0; p < row1; ++p) {
    const int64_t img = p / per_image;
    const int64_t pix = p % per_image;
    T* dst_img = g_in.data() + img * per_image_elems(g_in);
    const int32_t* m = map.data() + pix * taps;
    const T* src = cols + (p - row0) * kkc;
    for (int t = 0; t < taps; ++t) {
      const int32_t s = m[t];
      if (s < 0) continue;
      T* dst = dst_img + static_cast<int64_t>(s) * cin;
      const T* sv = src + t * cin;
      for (int ci = 0; ci < cin; ++ci) dst[ci] += sv[ci];
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const LayerSpec& spec, const Tensor<T>& weight,
                    const Tensor<T>& bias, const Tensor<T>& x, Tensor<T>& out) {
  if (x.c != spec.c_in)
    throw std::invalid_argument("conv2d_forward(" + spec.name + "): expected " +
                                std::to_string(spec.c_in) + " channels, got " +
                                std::to_string(x.c));
  const ConvGeom g = conv_geometry(x.h, x.w, spec.kernel, spec.stride, spec.padding);
  const auto map = conv_pixel_map(g);
  out = Tensor<T>(x.n, g.out_h, g.out_w, spec.c_out);

  const int64_t kkc = static_cast<int64_t>(spec.kernel) * spec.kernel * spec.c_in;
  const int64_t total_rows = static_cast<int64_t>(x.n) * g.out_h * g.out_w;
  const int64_t chunk = rows_per_chunk(kkc, sizeof(T));
  std::vector<T> cols(static_cast<size_t>(std::min(chunk, total_rows)) * kkc);

  for (int64_t row0 = 0; row0 < total_rows; row0 += chunk) {
    const int64_t row1 = std::min(total_rows, row0 + chunk);
    im2col_rows(x, g, map, row0, row1, cols.data());
    gemm_nn<T>(row1 - row0, spec.c_out, kkc, cols.data(), kkc, weight.data(), spec.c_out,
               out.data() + row0 * spec.c_out, spec.c_out, false);
  }
  // bias over rows
  parallel_for(0, total_rows, 4096, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      T* row = out.data() + p * spec.c_out;
      for (int co = 0; co < spec.c_out; ++co) row[co] += bias.data()[co];
    }
  });
}

template <typename T>
void conv2d_backward(const LayerSpec& spec, const Tensor<T>& weight,
                     const Tensor<T>& x, const Tensor<T>& g_out,
                     Tensor<T>& g_weight, Tensor<T>& g_bias, Tensor<T>& g_in) {
  const ConvGeom g = conv_geometry(x.h, x.w, spec.kernel, spec.stride, spec.padding);
  const auto map = conv_pixel_map(g);
  const int64_t kkc = static_cast<int64_t>(spec.kernel) * spec.kernel * spec.c_in;
  const int64_t total_rows = static_cast<int64_t>(x.n) * g.out_h * g.out_w;
  const int64_t chunk = rows_per_chunk(kkc, sizeof(T));
  const int64_t chunk_rows = std::min(chunk, total_rows);

  g_in = Tensor<T>::zeros_like(x);

  // weight^T once per call: [c_out, kkc]
  std::vector<T> wt(static_cast<size_t>(spec.c_out) * kkc);
  transpose(weight.data(), kkc, spec.c_out, wt.data());

  std::vector<T> cols(static_cast<size_t>(chunk_rows) * kkc);
  std::vector<T> colsT(static_cast<size_t>(chunk_rows) * kkc);
  std::vector<T> dcols(static_cast<size_t>(chunk_rows) * kkc);

  for (int64_t row0 = 0; row0 < total_rows; row0 += chunk) {
    const int64_t row1 = std::min(total_rows, row0 + chunk);
    const int64_t rows = row1 - row0;
    const T* gout_rows = g_out.data() + row0 * spec.c_out;

    // dW += cols^T [kkc, rows] x g_out [rows, c_out]
    im2col_rows(x, g, map, row0, row1, cols.data());
    transpose(cols.data(), rows, kkc, colsT.data());
    gemm_nn<T>(kkc, spec.c_out, rows, colsT.data(), rows, gout_rows, spec.c_out,
               g_weight.data(), spec.c_out, true);

    // dcols = g_out [rows, c_out] x W^T [c_out, kkc], then scatter
    gemm_nn<T>(rows, kkc, spec.c_out, gout_rows, spec.c_out, wt.data(), kkc,
               dcols.data(), kkc, false);
    col2im_add_rows(g_in, g, map, row0, row1, dcols.data());
  }

  // db: per-channel sums in fixed row order
  for (int64_t p = 0; p < total_rows; ++p) {
    const T* row = g_out.data() + p * spec.c_out;
    for (int co = 0; co < spec.c_out; ++co) g_bias.data()[co] += row[co];
  }
}

template <typename T>
void bn_forward_train(const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& run_mean,
                      Tensor<T>& run_var, double momentum, double eps,
                      bool update_running, Tensor<T>& out, BnCache<T>* cache) {
  const int c = x.c;
  const int64_t pixels = static_cast<int64_t>(x.n) * x.h * x.w;
  std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
  for (int64_t p = 0; p < pixels; ++p) {
    const T* row = x.data() + p * c;
    for (int ci = 0; ci < c; ++ci) {
      const double v = row[ci];
      sum[ci] += v;
      sumsq[ci] += v * v;
    }
  }
  std::vector<T> mean(c), istd(c), var(c);
  const double inv_m = 1.0 / static_cast<double>(pixels);
  for (int ci = 0; ci < c; ++ci) {
    const double mu = sum[ci] * inv_m;
    const double va = std::max(0.0, sumsq[ci] * inv_m - mu * mu);
    mean[ci] = static_cast<T>(mu);
    var[ci] = static_cast<T>(va);
    istd[ci] = static_cast<T>(1.0 / std::sqrt(va + eps));
  }
  if (update_running) {
    for (int ci = 0; ci < c; ++ci) {
      run_mean.v[ci] = static_cast<T>(momentum * run_mean.v[ci] + (1.0 - momentum) * mean[ci]);
      run_var.v[ci] = static_cast<T>(momentum * run_var.v[ci] + (1.0 - momentum) * var[ci]);
    }
  }
  out = Tensor<T>(x.n, x.h, x.w, x.c);
  Tensor<T>* xhat = nullptr;
  if (cache) {
    cache->mean.assign(mean.begin(), mean.end());
    cache->istd.assign(istd.begin(), istd.end());
    cache->xhat = Tensor<T>(x.n, x.h, x.w, x.c);
    xhat = &cache->xhat;
  }
  parallel_for(0, pixels, 8192, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const T* row = x.data() + p * c;
      T* orow = out.data() + p * c;
      T* hrow = xhat ? xhat->data() + p * c : nullptr;
      for (int ci = 0; ci < c; ++ci) {
        const T h = (row[ci] - mean[ci]) * istd[ci];
        if (hrow) hrow[ci] = h;
        orow[ci] = gamma.v[ci] * h + beta.v[ci];
      }
    }
  });
}

template <typename T>
void bn_forward_eval(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, const Tensor<T>& run_mean,
                     const Tensor<T>& run_var, double eps, Tensor<T>& out) {
  const int c = x.c;
  std::vector<T> a(c), b(c);
  for (int ci = 0; ci < c; ++ci) {
    const double s = gamma.v[ci] / std::sqrt(static_cast<double>(run_var.v[ci]) + eps);
    a[ci] = static_cast<T>(s);
    b[ci] = static_cast<T>(beta.v[ci] - s * run_mean.v[ci]);
  }
  out = Tensor<T>(x.n, x.h, x.w, x.c);
  const int64_t pixels = static_cast<int64_t>(x.n) * x.h * x.w;
  parallel_for(0, pixels, 8192, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const T* row = x.data() + p * c;
      T* orow = out.data() + p * c;
      for (int ci = 0; ci < c; ++ci) orow[ci] = a[ci] * row[ci] + b[ci];
    }
  });
}

template <typename T>
void bn_backward(const BnCache<T>& cache, const Tensor<T>& gamma,
                 const Tensor<T>& g_out, Tensor<T>& g_gamma, Tensor<T>& g_beta,
                 Tensor<T>& g_in) {
  const int c = g_out.c;
  const int64_t pixels = static_cast<int64_t>(g_out.n) * g_out.h * g_out.w;
  const double inv_m = 1.0 / static_cast<double>(pixels);
  std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
  for (int64_t p = 0; p < pixels; ++p) {
    const T* gr = g_out.data() + p * c;
    const T* hr = cache.xhat.data() + p * c;
    for (int ci = 0; ci < c; ++ci) {
      sum_dy[ci] += gr[ci];
      sum_dy_xhat[ci] += static_cast<double>(gr[ci]) * hr[ci];
    }
  }
  for (int ci = 0; ci < c; ++ci) {
    g_gamma.v[ci] += static_cast<T>(sum_dy_xhat[ci]);
    g_beta.v[ci] += static_cast<T>(sum_dy[ci]);
  }
  g_in = Tensor<T>(g_out.n, g_out.h, g_out.w, g_out.c);
  std::vector<T> k1(c), k2(c), k3(c);
  for (int ci = 0; ci < c; ++ci) {
    const double gi = static_cast<double>(gamma.v[ci]) * cache.istd[ci];
    k1[ci] = static_cast<T>(gi);
    k2[ci] = static_cast<T>(gi * sum_dy[ci] * inv_m);
    k3[ci] = static_cast<T>(gi * sum_dy_xhat[ci] * inv_m);
  }
  parallel_for(0, pixels, 8192, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const T* gr = g_out.data() + p * c;
      const T* hr = cache.xhat.data() + p * c;
      T* ir = g_in.data() + p * c;
      for (int ci = 0; ci < c; ++ci)
        ir[ci] = k1[ci] * gr[ci] - k2[ci] - hr[ci] * k3[ci];
    }
  });
}

template <typename T>
void activate_inplace(Activation act, Tensor<T>& x) {
  const int64_t n = static_cast<int64_t>(x.size());
  T* d = x.data();
  switch (act) {
    case Activation::None:
      return;
    case Activation::Relu:
      parallel_for(0, n, 1 << 16, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) d[i] = d[i] > T(0) ? d[i] : T(0);
      });
      return;
    case Activation::LeakyRelu:
      parallel_for(0, n, 1 << 16, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) d[i] = d[i] > T(0) ? d[i] : T(0.2) * d[i];
      });
      return;
    case Activation::Tanh:
      parallel_for(0, n, 1 << 14, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) d[i] = std::tanh(d[i]);
      });
      return;
    case Activation::Sigmoid:
      parallel_for(0, n, 1 << 14, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) d[i] = T(1) / (T(1) + std::exp(-d[i]));
      });
      return;
  }
}

template <typename T>
Tensor<T> activation_backward(Activation act, const Tensor<T>& y,
                              const Tensor<T>& g_out) {
  Tensor<T> g = g_out;
  const int64_t n = static_cast<int64_t>(g.size());
  T* gd = g.data();
  const T* yd = y.data();
  switch (act) {
    case Activation::None:
      break;
    case Activation::Relu:
      for (int64_t i = 0; i < n; ++i)
        if (yd[i] <= T(0)) gd[i] = T(0);
      break;
    case Activation::LeakyRelu:
      // y < 0 iff pre-activation < 0 (slope is positive)
      for (int64_t i = 0; i < n; ++i)
        if (yd[i] <= T(0)) gd[i] *= T(0.2);
      break;
    case Activation::Tanh:
      for (int64_t i = 0; i < n; ++i) gd[i] *= (T(1) - yd[i] * yd[i]);
      break;
    case Activation::Sigmoid:
      for (int64_t i = 0; i < n; ++i) gd[i] *= yd[i] * (T(1) - yd[i]);
      break;
  }
  return g;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  Tensor<T> out(x.n, x.h * 2, x.w * 2, x.c);
  const int c = x.c;
  parallel_for(0, static_cast<int64_t>(x.n) * x.h, 64, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int in = static_cast<int>(r / x.h);
      const int y = static_cast<int>(r % x.h);
      for (int xx = 0; xx < x.w; ++xx) {
        const T* src = &x.at(in, y, xx, 0);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            std::memcpy(&out.at(in, 2 * y + dy, 2 * xx + dx, 0), src, sizeof(T) * c);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& g_out) {
  Tensor<T> g(g_out.n, g_out.h / 2, g_out.w / 2, g_out.c);
  const int c = g.c;
  parallel_for(0, static_cast<int64_t>(g.n) * g.h, 64, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int in = static_cast<int>(r / g.h);
      const int y = static_cast<int>(r % g.h);
      for (int xx = 0; xx < g.w; ++xx) {
        T* dst = &g.at(in, y, xx, 0);
        for (int ci = 0; ci < c; ++ci) {
          dst[ci] = g_out.at(in, 2 * y, 2 * xx, ci) +
                    g_out.at(in, 2 * y, 2 * xx + 1, ci) +
                    g_out.at(in, 2 * y + 1, 2 * xx, ci) +
                    g_out.at(in, 2 * y + 1, 2 * xx + 1, ci);
        }
      }
    }
  });
  return g;
}

#define DEBLUR_INSTANTIATE(T)                                                  \
  template void conv2d_forward<T>(const LayerSpec&, const Tensor<T>&,          \
                                  const Tensor<T>&, const Tensor<T>&,          \
                                  Tensor<T>&);                                 \
  template void conv2d_backward<T>(const LayerSpec&, const Tensor<T>&,         \
                                   const Tensor<T>&, const Tensor<T>&,         \
                                   Tensor<T>&, Tensor<T>&, Tensor<T>&);        \
  template void bn_forward_train<T>(const Tensor<T>&, const Tensor<T>&,        \
                                    const Tensor<T>&, Tensor<T>&, Tensor<T>&,  \
                                    double, double, bool, Tensor<T>&,          \
                                    BnCache<T>*);                              \
  template void bn_forward_eval<T>(const Tensor<T>&, const Tensor<T>&,         \
                                   const Tensor<T>&, const Tensor<T>&,         \
                                   const Tensor<T>&, double, Tensor<T>&);      \
  template void bn_backward<T>(const BnCache<T>&, const Tensor<T>&,            \
                               const Tensor<T>&, Tensor<T>&, Tensor<T>&,       \
                               Tensor<T>&);                                    \
  template void activate_inplace<T>(Activation, Tensor<T>&);                   \
  template Tensor<T> activation_backward<T>(Activation, const Tensor<T>&,      \
                                            const Tensor<T>&);                 \
  template Tensor<T> upsample2x<T>(const Tensor<T>&);                          \
  template Tensor<T> upsample2x_backward<T>(const Tensor<T>&);

DEBLUR_INSTANTIATE(float)
DEBLUR_INSTANTIATE(double)
#undef DEBLUR_INSTANTIATE

}  // namespace deblur::nn
