#include "deblur/nn/network.hpp"

#include <algorithm>
#include <stdexcept>

#include "deblur/nn/rng.hpp"

namespace deblur::nn {

template <typename T>
Network<T>::Network(const ArchitectureSpec& spec, uint64_t seed, double init_std)
    : spec_(spec) {
  Rng rng(seed);
  layers_.resize(spec_.layers.size());
  pair_starting_at_.assign(spec_.layers.size(), -1);
  pair_ending_at_.assign(spec_.layers.size(), -1);
  for (size_t p = 0; p < spec_.residual_pairs.size(); ++p) {
    pair_starting_at_.at(spec_.residual_pairs[p].first_layer) = static_cast<int>(p);
    pair_ending_at_.at(spec_.residual_pairs[p].second_layer) = static_cast<int>(p);
  }
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState<T>& st = layers_[i];
    st.weight = Tensor<T>(l.kernel, l.kernel, l.c_in, l.c_out);
    for (auto& v : st.weight.v) v = static_cast<T>(rng.normal() * init_std);
    st.bias = Tensor<T>(1, 1, 1, l.c_out);
    st.g_weight = Tensor<T>::zeros_like(st.weight);
    st.g_bias = Tensor<T>::zeros_like(st.bias);
    if (l.normalization) {
      st.gamma = Tensor<T>(1, 1, 1, l.c_out);
      st.gamma.fill(T(1));
      st.beta = Tensor<T>(1, 1, 1, l.c_out);
      st.g_gamma = Tensor<T>::zeros_like(st.gamma);
      st.g_beta = Tensor<T>::zeros_like(st.beta);
      st.run_mean = Tensor<T>(1, 1, 1, l.c_out);
      st.run_var = Tensor<T>(1, 1, 1, l.c_out);
      st.run_var.fill(T(1));
    }
  }
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, ForwardMode mode, NetCache<T>* cache) {
  if (x.c != spec_.layers.front().c_in)
    throw std::invalid_argument(spec_.name + ": input has " + std::to_string(x.c) +
                                " channels, expected " +
                                std::to_string(spec_.layers.front().c_in));
  if (cache) {
    cache->layers.assign(spec_.layers.size(), {});
    cache->block_inputs.assign(spec_.residual_pairs.size(), {});
  }
  Tensor<T> cur = x;
  std::vector<Tensor<T>> block_inputs(spec_.residual_pairs.size());
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState<T>& st = layers_[i];
    if (l.kind == LayerKind::UpsampleConvolution) cur = upsample2x(cur);
    const int pair_start = pair_starting_at_[i];
    if (pair_start >= 0) {
      block_inputs[pair_start] = cur;
      if (cache) cache->block_inputs[pair_start] = cur;
    }
    if (cache) cache->layers[i].conv_in = cur;

    Tensor<T> y;
    conv2d_forward(l, st.weight, st.bias, cur, y);
    if (l.normalization) {
      Tensor<T> normed;
      if (mode == ForwardMode::Eval) {
        bn_forward_eval(y, st.gamma, st.beta, st.run_mean, st.run_var, bn_eps, normed);
      } else {
        bn_forward_train(y, st.gamma, st.beta, st.run_mean, st.run_var, bn_momentum,
                         bn_eps, mode == ForwardMode::Train, normed,
                         cache ? &cache->layers[i].bn : nullptr);
      }
      y = std::move(normed);
    }
    activate_inplace(l.activation, y);
    if (cache) cache->layers[i].act_out = y;

    const int pair_end = pair_ending_at_[i];
    if (pair_end >= 0) {
      const Tensor<T>& skip = block_inputs[pair_end];
      if (!skip.same_shape(y))
        throw std::logic_error(spec_.name + ": residual shapes diverge at " + l.name);
      for (size_t k = 0; k < y.v.size(); ++k) y.v[k] += skip.v[k];
    }
    cur = std::move(y);
  }
  if (spec_.global_skip) {
    if (!cur.same_shape(x))
      throw std::logic_error(spec_.name + ": skip output shape " + cur.shape_str() +
                             " differs from input " + x.shape_str());
    // residual head: the network learns a bounded correction on top of its
    // input, so a shrinking head recovers the identity map
    for (size_t k = 0; k < cur.v.size(); ++k) cur.v[k] += x.v[k];
    if (cache) cache->skip_sum = cur;
    for (auto& v : cur.v) v = std::clamp(v, T(-1), T(1));
  }
  return cur;
}

template <typename T>
Tensor<T> Network<T>::backward(const NetCache<T>& cache, const Tensor<T>& grad_out) {
  if (cache.layers.size() != spec_.layers.size())
    throw std::logic_error("Network::backward: cache does not match a forward pass");
  Tensor<T> g = grad_out;
  if (spec_.global_skip) {
    // clamp: gradient flows only where the sum stayed strictly inside [-1, 1];
    // both the head and the input branch share the mask
    for (size_t k = 0; k < g.v.size(); ++k)
      if (!(cache.skip_sum.v[k] > T(-1) && cache.skip_sum.v[k] < T(1))) g.v[k] = T(0);
  }
  const Tensor<T> skip_grad = g;  // reused for the input branch

  std::vector<Tensor<T>> res_grads(spec_.residual_pairs.size());
  for (int i = static_cast<int>(spec_.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState<T>& st = layers_[i];
    const int pair_end = pair_ending_at_[i];
    if (pair_end >= 0) res_grads[pair_end] = g;

    g = activation_backward(l.activation, cache.layers[i].act_out, g);
    if (l.normalization) {
      Tensor<T> gi;
      bn_backward(cache.layers[i].bn, st.gamma, g, st.g_gamma, st.g_beta, gi);
      g = std::move(gi);
    }
    Tensor<T> gin;
    conv2d_backward(l, st.weight, cache.layers[i].conv_in, g, st.g_weight, st.g_bias, gin);
    g = std::move(gin);
    if (l.kind == LayerKind::UpsampleConvolution) g = upsample2x_backward(g);

    const int pair_start = pair_starting_at_[i];
    if (pair_start >= 0) {
      const Tensor<T>& rg = res_grads[pair_start];
      for (size_t k = 0; k < g.v.size(); ++k) g.v[k] += rg.v[k];
    }
  }
  if (spec_.global_skip)
    for (size_t k = 0; k < g.v.size(); ++k) g.v[k] += skip_grad.v[k];
  return g;
}

template <typename T>
void Network<T>::zero_grads() {
  for (auto& st : layers_) {
    st.g_weight.fill(T(0));
    st.g_bias.fill(T(0));
    if (st.gamma.size()) {
      st.g_gamma.fill(T(0));
      st.g_beta.fill(T(0));
    }
  }
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::params() {
  std::vector<ParamRef<T>> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const std::string& n = spec_.layers[i].name;
    out.push_back({n + ".weight", &layers_[i].weight, &layers_[i].g_weight});
    out.push_back({n + ".bias", &layers_[i].bias, &layers_[i].g_bias});
    if (layers_[i].gamma.size()) {
      out.push_back({n + ".gamma", &layers_[i].gamma, &layers_[i].g_gamma});
      out.push_back({n + ".beta", &layers_[i].beta, &layers_[i].g_beta});
    }
  }
  return out;
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::state() {
  std::vector<ParamRef<T>> out;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i].run_mean.size()) continue;
    const std::string& n = spec_.layers[i].name;
    out.push_back({n + ".running_mean", &layers_[i].run_mean, nullptr});
    out.push_back({n + ".running_var", &layers_[i].run_var, nullptr});
  }
  return out;
}

template <typename T>
long long Network<T>::conv_param_count() const {
  long long total = 0;
  for (const auto& st : layers_)
    total += static_cast<long long>(st.weight.size()) + static_cast<long long>(st.bias.size());
  return total;
}

template <typename T>
long long Network<T>::total_param_count() const {
  long long total = conv_param_count();
  for (const auto& st : layers_)
    total += static_cast<long long>(st.gamma.size() + st.beta.size() +
                                    st.run_mean.size() + st.run_var.size());
  return total;
}

template <typename T>
std::vector<double> spatial_mean_scores(const Tensor<T>& map) {
  if (map.c != 1) throw std::invalid_argument("spatial_mean_scores: expected a 1-channel map");
  std::vector<double> scores(map.n, 0.0);
  const int64_t per = static_cast<int64_t>(map.h) * map.w;
  for (int in = 0; in < map.n; ++in) {
    double acc = 0.0;
    const T* d = map.data() + in * per;
    for (int64_t k = 0; k < per; ++k) acc += d[k];
    scores[in] = acc / static_cast<double>(per);
  }
  return scores;
}

template <typename T>
Tensor<T> spatial_mean_backward(int n, int h, int w, const std::vector<double>& g_scores) {
  Tensor<T> g(n, h, w, 1);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int in = 0; in < n; ++in) {
    const T v = static_cast<T>(g_scores[in] * inv);
    T* d = g.data() + static_cast<int64_t>(in) * h * w;
    for (int64_t k = 0; k < static_cast<int64_t>(h) * w; ++k) d[k] = v;
  }
  return g;
}

template class Network<float>;
template class Network<double>;
template std::vector<double> spatial_mean_scores<float>(const Tensor<float>&);
template std::vector<double> spatial_mean_scores<double>(const Tensor<double>&);
template Tensor<float> spatial_mean_backward<float>(int, int, int, const std::vector<double>&);
template Tensor<double> spatial_mean_backward<double>(int, int, int, const std::vector<double>&);

}  // namespace deblur::nn
