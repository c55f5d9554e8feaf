#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "deblur/image.hpp"
#include "deblur/nn/network.hpp"

namespace deblur {

struct LossWeights {
  double perceptual_weight = 100.0;
  double adversarial_weight = 1.0;
};

void validate(const LossWeights& w);

// Opaque per-call state so extractors stay shareable across threads.
struct ExtractorContext {
  virtual ~ExtractorContext() = default;
};

// Fixed (never trained) feature map used by the perceptual loss.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  // Human-readable statement of what the extractor does to [-1,1] inputs
  // before its own layers see them.
  virtual std::string preprocessing() const = 0;

  virtual ImageTensor forward_with_grad(const ImageTensor& x,
                                        std::unique_ptr<ExtractorContext>& ctx) const = 0;
  virtual ImageTensor vjp(ExtractorContext& ctx, const ImageTensor& g_features) const = 0;

  ImageTensor features(const ImageTensor& x) const {
    std::unique_ptr<ExtractorContext> ctx;
    return forward_with_grad(x, ctx);
  }
};

// features(x) == x. No preprocessing.
class IdentityExtractor final : public FeatureExtractor {
 public:
  std::string name() const override { return "identity"; }
  std::string preprocessing() const override { return "none; raw [-1,1] tensor"; }
  ImageTensor forward_with_grad(const ImageTensor& x,
                                std::unique_ptr<ExtractorContext>& ctx) const override;
  ImageTensor vjp(ExtractorContext& ctx, const ImageTensor& g_features) const override;
};

// Small fixed-seed convolutional stack; a stand-in feature space when no
// pretrained weights are available (tests, smoke training).
class RandomConvExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(uint64_t seed = 97);
  std::string name() const override;
  std::string preprocessing() const override { return "none; raw [-1,1] tensor"; }
  ImageTensor forward_with_grad(const ImageTensor& x,
                                std::unique_ptr<ExtractorContext>& ctx) const override;
  ImageTensor vjp(ExtractorContext& ctx, const ImageTensor& g_features) const override;

 private:
  uint64_t seed_;
  mutable nn::Network<float> net_;  // frozen; forwards never mutate it
};

// 16-layer VGG conv stack up to a named layer (default conv3_3, post-ReLU),
// weights loaded from a tensor container file. See docs for the format and
// the export recipe.
class Vgg16Extractor final : public FeatureExtractor {
 public:
  Vgg16Extractor(const std::string& weights_path, const std::string& layer = "conv3_3");
  std::string name() const override { return "vgg16:" + layer_; }
  std::string preprocessing() const override;
  ImageTensor forward_with_grad(const ImageTensor& x,
                                std::unique_ptr<ExtractorContext>& ctx) const override;
  ImageTensor vjp(ExtractorContext& ctx, const ImageTensor& g_features) const override;

 private:
  struct Stage {  // conv (+relu) or pool
    bool pool = false;
    LayerSpec spec;
    nn::TensorF weight, bias;
  };
  std::vector<Stage> stages_;
  std::string layer_;
};

// Builds an extractor from a config string: "identity",
// "random_conv[:seed]", or "vgg16:<weights path>[:layer]".
std::unique_ptr<FeatureExtractor> make_feature_extractor(const std::string& spec);

// Mean over all elements of (a - b)^2; shared by the perceptual loss and the
// double-precision gradient checks.
template <typename T>
double tensor_mse(const nn::Tensor<T>& a, const nn::Tensor<T>& b);

// d/db of tensor_mse: 2 (b - a) / numel.
template <typename T>
nn::Tensor<T> tensor_mse_grad(const nn::Tensor<T>& a, const nn::Tensor<T>& b);

// Mean squared feature distance between the sharp target and the generated
// image under a fixed extractor.
double perceptual_loss(const ImageTensor& sharp, const ImageTensor& generated,
                       const FeatureExtractor& fx);

// mean(scores_fake) - mean(scores_real); the critic minimizes this.
double wasserstein_critic_loss(std::span<const double> scores_real,
                               std::span<const double> scores_fake);

// -mean(scores_fake).
double generator_adversarial_loss(std::span<const double> scores_fake);

double combined_generator_loss(const ImageTensor& sharp, const ImageTensor& generated,
                               std::span<const double> scores_fake,
                               const FeatureExtractor& fx, const LossWeights& w);

// Eq-style minimax diagnostic: mean(log r) + mean(log(1 - f)) with scores
// clamped to [1e-7, 1 - 1e-7]. Never trained on.
double gan_value_estimate(std::span<const double> scores_real,
                          std::span<const double> scores_fake);

}  // namespace deblur
