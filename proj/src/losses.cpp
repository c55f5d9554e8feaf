#include "deblur/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "deblur/serialize.hpp"

namespace deblur {

void validate(const LossWeights& w) {
  if (w.perceptual_weight < 0 || w.adversarial_weight < 0)
    throw std::invalid_argument("LossWeights: weights must be >= 0");
  if (w.perceptual_weight == 0 && w.adversarial_weight == 0)
    throw std::invalid_argument("LossWeights: at least one weight must be positive");
}

template <typename T>
double tensor_mse(const nn::Tensor<T>& a, const nn::Tensor<T>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("tensor_mse: shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

template <typename T>
nn::Tensor<T> tensor_mse_grad(const nn::Tensor<T>& a, const nn::Tensor<T>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("tensor_mse_grad: shape mismatch");
  nn::Tensor<T> g = nn::Tensor<T>::zeros_like(a);
  const double scale = 2.0 / static_cast<double>(a.size());
  for (size_t i = 0; i < a.size(); ++i)
    g.v[i] = static_cast<T>(scale * (static_cast<double>(b.v[i]) - static_cast<double>(a.v[i])));
  return g;
}

template double tensor_mse<float>(const nn::Tensor<float>&, const nn::Tensor<float>&);
template double tensor_mse<double>(const nn::Tensor<double>&, const nn::Tensor<double>&);
template nn::Tensor<float> tensor_mse_grad<float>(const nn::Tensor<float>&, const nn::Tensor<float>&);
template nn::Tensor<double> tensor_mse_grad<double>(const nn::Tensor<double>&, const nn::Tensor<double>&);

double perceptual_loss(const ImageTensor& sharp, const ImageTensor& generated,
                       const FeatureExtractor& fx) {
  if (!sharp.same_shape(generated))
    throw std::invalid_argument("perceptual_loss: shape mismatch " + sharp.shape_str() +
                                " vs " + generated.shape_str());
  return tensor_mse(fx.features(sharp), fx.features(generated));
}

double wasserstein_critic_loss(std::span<const double> scores_real,
                               std::span<const double> scores_fake) {
  if (scores_real.empty() || scores_fake.empty())
    throw std::invalid_argument("wasserstein_critic_loss: empty score batch");
  double real = 0.0, fake = 0.0;
  for (double s : scores_real) real += s;
  for (double s : scores_fake) fake += s;
  return fake / static_cast<double>(scores_fake.size()) -
         real / static_cast<double>(scores_real.size());
}

double generator_adversarial_loss(std::span<const double> scores_fake) {
  if (scores_fake.empty())
    throw std::invalid_argument("generator_adversarial_loss: empty score batch");
  double acc = 0.0;
  for (double s : scores_fake) acc += s;
  return -acc / static_cast<double>(scores_fake.size());
}

double combined_generator_loss(const ImageTensor& sharp, const ImageTensor& generated,
                               std::span<const double> scores_fake,
                               const FeatureExtractor& fx, const LossWeights& w) {
  validate(w);
  return w.perceptual_weight * perceptual_loss(sharp, generated, fx) +
         w.adversarial_weight * generator_adversarial_loss(scores_fake);
}

double gan_value_estimate(std::span<const double> scores_real,
                          std::span<const double> scores_fake) {
  if (scores_real.empty() || scores_fake.empty())
    throw std::invalid_argument("gan_value_estimate: empty score batch");
  constexpr double kEps = 1e-7;
  auto check = [](double s) {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("gan_value_estimate: score " + std::to_string(s) +
                                  " outside [0, 1]");
  };
  double lr = 0.0, lf = 0.0;
  for (double s : scores_real) {
    check(s);
    lr += std::log(std::clamp(s, kEps, 1.0 - kEps));
  }
  for (double s : scores_fake) {
    check(s);
    lf += std::log(1.0 - std::clamp(s, kEps, 1.0 - kEps));
  }
  return lr / static_cast<double>(scores_real.size()) +
         lf / static_cast<double>(scores_fake.size());
}

// ---- identity extractor ----

ImageTensor IdentityExtractor::forward_with_grad(const ImageTensor& x,
                                                 std::unique_ptr<ExtractorContext>&) const {
  return x;
}

ImageTensor IdentityExtractor::vjp(ExtractorContext&, const ImageTensor& g) const {
  return g;
}

// ---- random conv extractor ----

namespace {

ArchitectureSpec random_feature_spec() {
  ArchitectureSpec s;
  s.name = "random_conv_features";
  LayerSpec l1;
  l1.name = "feat_0";
  l1.kernel = 3;
  l1.stride = 1;
  l1.c_in = 3;
  l1.c_out = 16;
  l1.activation = Activation::LeakyRelu;
  LayerSpec l2 = l1;
  l2.name = "feat_1";
  l2.stride = 2;
  l2.c_in = 16;
  l2.c_out = 32;
  s.layers = {l1, l2};
  return s;
}

struct NetContext final : ExtractorContext {
  nn::NetCache<float> cache;
};

}  // namespace

RandomConvExtractor::RandomConvExtractor(uint64_t seed)
    : seed_(seed), net_(random_feature_spec(), seed, 0.2) {}

std::string RandomConvExtractor::name() const {
  return "random_conv:" + std::to_string(seed_);
}

ImageTensor RandomConvExtractor::forward_with_grad(
    const ImageTensor& x, std::unique_ptr<ExtractorContext>& ctx) const {
  auto c = std::make_unique<NetContext>();
  // TrainFrozen touches no state; the stack has no normalization layers
  ImageTensor out = net_.forward(x, nn::ForwardMode::TrainFrozen, &c->cache);
  ctx = std::move(c);
  return out;
}

ImageTensor RandomConvExtractor::vjp(ExtractorContext& ctx, const ImageTensor& g) const {
  auto& c = dynamic_cast<NetContext&>(ctx);
  net_.zero_grads();  // parameter grads are scratch here; the net is frozen
  return net_.backward(c.cache, g);
}

// ---- vgg16 extractor ----

namespace {

struct VggLayerDef {
  const char* name;
  int c_in, c_out;
  bool pool_before;
};

// Convolutional prefix of the 16-layer VGG configuration.
constexpr VggLayerDef kVggLayers[] = {
    {"conv1_1", 3, 64, false},    {"conv1_2", 64, 64, false},
    {"conv2_1", 64, 128, true},   {"conv2_2", 128, 128, false},
    {"conv3_1", 128, 256, true},  {"conv3_2", 256, 256, false},
    {"conv3_3", 256, 256, false}, {"conv4_1", 256, 512, true},
    {"conv4_2", 512, 512, false}, {"conv4_3", 512, 512, false},
    {"conv5_1", 512, 512, true},  {"conv5_2", 512, 512, false},
    {"conv5_3", 512, 512, false},
};

struct VggContext final : ExtractorContext {
  ImageTensor preprocessed;
  std::vector<ImageTensor> conv_inputs;
  std::vector<ImageTensor> act_outputs;
  std::vector<std::vector<int64_t>> pool_argmax;
  std::vector<std::pair<int, int>> pool_in_dims;
};

constexpr float kVggMeanBgr[3] = {103.939f, 116.779f, 123.68f};

ImageTensor vgg_preprocess(const ImageTensor& x) {
  if (x.c != 3) throw std::invalid_argument("vgg16 extractor expects 3-channel input");
  ImageTensor out(x.n, x.h, x.w, 3);
  const size_t pixels = x.size() / 3;
  for (size_t p = 0; p < pixels; ++p) {
    const float* src = x.data() + p * 3;
    float* dst = out.data() + p * 3;
    // [-1,1] RGB -> [0,255] BGR minus channel means
    for (int c = 0; c < 3; ++c)
      dst[c] = (src[2 - c] + 1.0f) * 127.5f - kVggMeanBgr[c];
  }
  return out;
}

ImageTensor vgg_preprocess_vjp(const ImageTensor& g) {
  ImageTensor out(g.n, g.h, g.w, 3);
  const size_t pixels = g.size() / 3;
  for (size_t p = 0; p < pixels; ++p) {
    const float* src = g.data() + p * 3;
    float* dst = out.data() + p * 3;
    for (int c = 0; c < 3; ++c) dst[c] = src[2 - c] * 127.5f;
  }
  return out;
}

ImageTensor maxpool2x2(const ImageTensor& x, std::vector<int64_t>& argmax) {
  const int oh = x.h / 2, ow = x.w / 2;
  ImageTensor out(x.n, oh, ow, x.c);
  argmax.assign(out.size(), 0);
  for (int n = 0; n < x.n; ++n)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        for (int c = 0; c < x.c; ++c) {
          float best = -std::numeric_limits<float>::infinity();
          int64_t best_idx = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int64_t idx =
                  ((static_cast<int64_t>(n) * x.h + 2 * y + dy) * x.w + 2 * xx + dx) * x.c + c;
              if (x.v[idx] > best) {
                best = x.v[idx];
                best_idx = idx;
              }
            }
          const int64_t oidx = ((static_cast<int64_t>(n) * oh + y) * ow + xx) * x.c + c;
          out.v[oidx] = best;
          argmax[oidx] = best_idx;
        }
  return out;
}

}  // namespace

Vgg16Extractor::Vgg16Extractor(const std::string& weights_path, const std::string& layer)
    : layer_(layer) {
  bool known = false;
  for (const auto& def : kVggLayers) known = known || layer_ == def.name;
  if (!known)
    throw std::invalid_argument("vgg16 extractor: unknown layer '" + layer_ +
                                "' (use conv1_1 .. conv5_3)");
  const TensorFile tf = TensorFile::load(weights_path);
  bool found = false;
  for (const auto& def : kVggLayers) {
    Stage st;
    if (def.pool_before) {
      Stage pool;
      pool.pool = true;
      stages_.push_back(std::move(pool));
    }
    st.spec.name = def.name;
    st.spec.kernel = 3;
    st.spec.stride = 1;
    st.spec.c_in = def.c_in;
    st.spec.c_out = def.c_out;
    st.spec.activation = Activation::Relu;
    st.spec.padding = PadMode::Zero;
    st.weight = tf.require(std::string(def.name) + ".weight");
    st.bias = tf.require(std::string(def.name) + ".bias");
    if (st.weight.n != 3 || st.weight.h != 3 || st.weight.w != def.c_in ||
        st.weight.c != def.c_out)
      throw std::runtime_error(std::string("vgg16 weights: ") + def.name +
                               " has shape " + st.weight.shape_str());
    stages_.push_back(std::move(st));
    if (layer_ == def.name) {
      found = true;
      break;
    }
  }
  (void)found;
}

std::string Vgg16Extractor::preprocessing() const {
  return "[-1,1] RGB -> [0,255] BGR minus channel means (103.939, 116.779, 123.68)";
}

ImageTensor Vgg16Extractor::forward_with_grad(const ImageTensor& x,
                                              std::unique_ptr<ExtractorContext>& ctx) const {
  auto c = std::make_unique<VggContext>();
  ImageTensor cur = vgg_preprocess(x);
  for (const auto& st : stages_) {
    if (st.pool) {
      c->pool_in_dims.emplace_back(cur.h, cur.w);
      c->pool_argmax.emplace_back();
      cur = maxpool2x2(cur, c->pool_argmax.back());
      continue;
    }
    c->conv_inputs.push_back(cur);
    ImageTensor y;
    nn::conv2d_forward(st.spec, st.weight, st.bias, cur, y);
    nn::activate_inplace(st.spec.activation, y);
    c->act_outputs.push_back(y);
    cur = std::move(y);
  }
  ctx = std::move(c);
  return cur;
}

ImageTensor Vgg16Extractor::vjp(ExtractorContext& ctx, const ImageTensor& g_features) const {
  auto& c = dynamic_cast<VggContext&>(ctx);
  ImageTensor g = g_features;
  int conv_idx = static_cast<int>(c.conv_inputs.size());
  int pool_idx = static_cast<int>(c.pool_argmax.size());
  for (int i = static_cast<int>(stages_.size()) - 1; i >= 0; --i) {
    const auto& st = stages_[i];
    if (st.pool) {
      --pool_idx;
      const auto [ih, iw] = c.pool_in_dims[pool_idx];
      ImageTensor gin(g.n, ih, iw, g.c);
      const auto& amax = c.pool_argmax[pool_idx];
      for (size_t k = 0; k < g.size(); ++k) gin.v[amax[k]] += g.v[k];
      g = std::move(gin);
      continue;
    }
    --conv_idx;
    g = nn::activation_backward(st.spec.activation, c.act_outputs[conv_idx], g);
    nn::TensorF gw = nn::TensorF::zeros_like(st.weight);  // discarded: frozen weights
    nn::TensorF gb = nn::TensorF::zeros_like(st.bias);
    nn::TensorF gin;
    nn::conv2d_backward(st.spec, st.weight, c.conv_inputs[conv_idx], g, gw, gb, gin);
    g = std::move(gin);
  }
  return vgg_preprocess_vjp(g);
}

std::unique_ptr<FeatureExtractor> make_feature_extractor(const std::string& spec) {
  if (spec == "identity") return std::make_unique<IdentityExtractor>();
  if (spec == "random_conv") return std::make_unique<RandomConvExtractor>();
  if (spec.rfind("random_conv:", 0) == 0)
    return std::make_unique<RandomConvExtractor>(std::stoull(spec.substr(12)));
  if (spec.rfind("vgg16:", 0) == 0) {
    std::string rest = spec.substr(6);
    const auto colon = rest.find_last_of(':');
    if (colon != std::string::npos && rest.compare(colon + 1, 4, "conv") == 0)
      return std::make_unique<Vgg16Extractor>(rest.substr(0, colon), rest.substr(colon + 1));
    return std::make_unique<Vgg16Extractor>(rest);
  }
  throw std::invalid_argument(
      "unknown feature extractor '" + spec +
      "'; expected identity, random_conv[:seed], or vgg16:<weights>[:layer]");
}

}  // namespace deblur
