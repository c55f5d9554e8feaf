#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deblur/architecture.hpp"
#include "deblur/nn/ops.hpp"
#include "deblur/nn/tensor.hpp"

namespace deblur::nn {

enum class ForwardMode {
  Train,        // batch statistics, running stats updated
  TrainFrozen,  // batch statistics, no state mutation (frozen-critic pass)
  Eval          // running statistics, no state mutation
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;  // null for non-trainable state
};

template <typename T>
struct LayerState {
  Tensor<T> weight, bias;      // weight layout [K, K, C_in, C_out]
  Tensor<T> g_weight, g_bias;
  Tensor<T> gamma, beta, g_gamma, g_beta;  // present iff normalized
  Tensor<T> run_mean, run_var;
};

template <typename T>
struct NetCache {
  struct PerLayer {
    Tensor<T> conv_in;   // input to the conv (after any upsampling)
    Tensor<T> act_out;   // activation output, pre residual add
    BnCache<T> bn;
  };
  std::vector<PerLayer> layers;
  std::vector<Tensor<T>> block_inputs;  // per residual pair
  Tensor<T> skip_sum;                   // input + head before the output clamp
};

// A trainable network instantiated from a declarative spec. Forward passes in
// Eval / TrainFrozen modes leave the object unmodified; Train mode updates
// batch-norm running statistics. Training (gradient/weight mutation) needs
// exclusive access.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(const ArchitectureSpec& spec, uint64_t seed, double init_std = 0.02);

  Tensor<T> forward(const Tensor<T>& x, ForwardMode mode, NetCache<T>* cache = nullptr);

  // Eval-mode convenience; never mutates.
  Tensor<T> infer(const Tensor<T>& x) const {
    return const_cast<Network*>(this)->forward(x, ForwardMode::Eval, nullptr);
  }

  // Backprop through the cached forward pass. Parameter gradients accumulate;
  // returns the gradient with respect to the network input.
  Tensor<T> backward(const NetCache<T>& cache, const Tensor<T>& grad_out);

  void zero_grads();

  std::vector<ParamRef<T>> params();        // trainable: conv W/b, bn gamma/beta
  std::vector<ParamRef<T>> state();         // bn running mean/var
  long long conv_param_count() const;       // weights + biases, the audited count
  long long total_param_count() const;      // + 4 per normalized channel

  const ArchitectureSpec& spec() const { return spec_; }
  LayerState<T>& layer_state(int i) { return layers_[i]; }

  double bn_momentum = 0.9;
  double bn_eps = 1e-3;

 private:
  ArchitectureSpec spec_;
  std::vector<LayerState<T>> layers_;
  std::vector<int> pair_starting_at_;  // layer idx -> residual pair idx or -1
  std::vector<int> pair_ending_at_;
};

// Patch-probability head: per-sample spatial mean of a 1-channel map.
template <typename T>
std::vector<double> spatial_mean_scores(const Tensor<T>& map);

template <typename T>
Tensor<T> spatial_mean_backward(int n, int h, int w, const std::vector<double>& g_scores);

using NetworkF = Network<float>;
using NetworkD = Network<double>;

}  // namespace deblur::nn
