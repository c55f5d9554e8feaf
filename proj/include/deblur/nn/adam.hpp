#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "deblur/nn/network.hpp"
#include "deblur/nn/tensor.hpp"

namespace deblur::nn {

// Adaptive-moment estimation with bias correction.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ParamRef<T>> params, double lr, double beta1, double beta2,
       double eps)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(Tensor<T>::zeros_like(*p.value));
      v_.push_back(Tensor<T>::zeros_like(*p.value));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor<T>& w = *params_[i].value;
      const Tensor<T>& g = *params_[i].grad;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (size_t k = 0; k < w.size(); ++k) {
        const double gk = g.v[k];
        const double mk = beta1_ * m.v[k] + (1.0 - beta1_) * gk;
        const double vk = beta2_ * v.v[k] + (1.0 - beta2_) * gk * gk;
        m.v[k] = static_cast<T>(mk);
        v.v[k] = static_cast<T>(vk);
        w.v[k] -= static_cast<T>(lr_ * (mk / bc1) / (std::sqrt(vk / bc2) + eps_));
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  Tensor<T>& moment1(size_t i) { return m_.at(i); }
  Tensor<T>& moment2(size_t i) { return v_.at(i); }
  size_t size() const { return params_.size(); }
  const ParamRef<T>& param(size_t i) const { return params_.at(i); }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

}  // namespace deblur::nn
