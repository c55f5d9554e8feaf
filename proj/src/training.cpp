#include "deblur/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "deblur/model.hpp"
#include "deblur/nn/rng.hpp"
#include "deblur/serialize.hpp"

namespace fs = std::filesystem;

namespace deblur {

void validate(const TrainConfig& cfg) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw std::invalid_argument(std::string("TrainConfig: ") + what + " must be positive");
  };
  positive(cfg.batch_size, "batch_size");
  positive(cfg.epochs, "epochs");
  positive(cfg.learning_rate, "learning_rate");
  positive(cfg.beta_1, "beta_1");
  positive(cfg.beta_2, "beta_2");
  positive(cfg.epsilon, "epsilon");
  positive(cfg.patch, "patch");
  positive(cfg.critic_steps_per_gen_step, "critic_steps_per_gen_step");
  if (cfg.patch % 16 != 0)
    throw std::invalid_argument(
        "TrainConfig: patch must be a multiple of 16 (two generator strides, "
        "four discriminator strides)");
  if (!(cfg.bn_momentum >= 0.0 && cfg.bn_momentum < 1.0))
    throw std::invalid_argument("TrainConfig: bn_momentum must be in [0, 1)");
  if (!(cfg.init_std > 0.0))
    throw std::invalid_argument("TrainConfig: init_std must be positive");
  if (cfg.critic_weight_clip < 0.0)
    throw std::invalid_argument("TrainConfig: critic_weight_clip must be >= 0");
  validate(cfg.loss_weights);
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "batch_size",      "epochs",
      "learning_rate",   "beta_1",
      "beta_2",          "epsilon",
      "patch",           "critic_steps_per_gen_step",
      "perceptual_weight", "adversarial_weight",
      "seed",            "dataset_root",
      "split",           "feature_extractor",
      "out_dir",         "critic_weight_clip",
      "shuffle",         "bn_momentum",
      "init_std"};
  return keys;
}

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_double = [&] { return std::stod(value); };
  if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "epochs") cfg.epochs = as_int();
  else if (key == "learning_rate") cfg.learning_rate = as_double();
  else if (key == "beta_1") cfg.beta_1 = as_double();
  else if (key == "beta_2") cfg.beta_2 = as_double();
  else if (key == "epsilon") cfg.epsilon = as_double();
  else if (key == "patch") cfg.patch = as_int();
  else if (key == "critic_steps_per_gen_step") cfg.critic_steps_per_gen_step = as_int();
  else if (key == "perceptual_weight") cfg.loss_weights.perceptual_weight = as_double();
  else if (key == "adversarial_weight") cfg.loss_weights.adversarial_weight = as_double();
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "dataset_root") cfg.dataset_root = value;
  else if (key == "split") cfg.split = value;
  else if (key == "feature_extractor") cfg.feature_extractor = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "critic_weight_clip") cfg.critic_weight_clip = as_double();
  else if (key == "shuffle") cfg.shuffle = (value == "1" || value == "true" || value == "on");
  else if (key == "bn_momentum") cfg.bn_momentum = as_double();
  else if (key == "init_std") cfg.init_std = as_double();
  else {
    std::string msg = "unknown config key '" + key + "'; valid keys:";
    for (const auto& k : train_config_keys()) msg += " " + k;
    throw std::invalid_argument(msg);
  }
}

TrainConfig parse_train_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    apply_config_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string to_text(const TrainConfig& cfg) {
  char buf[64];
  std::ostringstream os;
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "learning_rate = " << num(cfg.learning_rate) << "\n";
  os << "beta_1 = " << num(cfg.beta_1) << "\n";
  os << "beta_2 = " << num(cfg.beta_2) << "\n";
  os << "epsilon = " << num(cfg.epsilon) << "\n";
  os << "patch = " << cfg.patch << "\n";
  os << "critic_steps_per_gen_step = " << cfg.critic_steps_per_gen_step << "\n";
  os << "perceptual_weight = " << num(cfg.loss_weights.perceptual_weight) << "\n";
  os << "adversarial_weight = " << num(cfg.loss_weights.adversarial_weight) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "dataset_root = " << cfg.dataset_root << "\n";
  os << "split = " << cfg.split << "\n";
  os << "feature_extractor = " << cfg.feature_extractor << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "critic_weight_clip = " << num(cfg.critic_weight_clip) << "\n";
  os << "shuffle = " << (cfg.shuffle ? 1 : 0) << "\n";
  os << "bn_momentum = " << num(cfg.bn_momentum) << "\n";
  os << "init_std = " << num(cfg.init_std) << "\n";
  return os.str();
}

uint64_t config_fingerprint(const TrainConfig& cfg) {
  const std::string text = to_text(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool StepReport::all_finite() const {
  return std::isfinite(d_loss) && std::isfinite(g_loss_total) &&
         std::isfinite(g_perceptual) && std::isfinite(g_adversarial) &&
         std::isfinite(eq1_value) && std::isfinite(wall_time);
}

std::string StepReport::to_log_line() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.3f",
                static_cast<long long>(step), d_loss, g_loss_total, g_perceptual,
                g_adversarial, eq1_value, wall_time);
  return buf;
}

std::string StepReport::log_header() {
  return "# step\td_loss\tg_loss_total\tg_perceptual\tg_adversarial\teq1_value\twall_time";
}

// ---- checkpoint ----

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  TensorFile tf;
  tf.meta["format"] = "deblur-checkpoint-1";
  tf.meta["config_fingerprint"] = std::to_string(c.config_fingerprint);
  tf.meta["completed_epochs"] = std::to_string(c.completed_epochs);
  tf.meta["completed_steps"] = std::to_string(c.completed_steps);
  tf.meta["g_adam_steps"] = std::to_string(c.g_adam_steps);
  tf.meta["d_adam_steps"] = std::to_string(c.d_adam_steps);
  for (const auto& [name, t] : c.tensors) tf.add(name, t);
  tf.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  TensorFile tf = TensorFile::load(path);
  if (tf.meta.count("format") == 0 || tf.meta.at("format") != "deblur-checkpoint-1")
    throw std::runtime_error(path + ": not a deblur checkpoint");
  Checkpoint c;
  c.config_fingerprint = std::stoull(tf.meta.at("config_fingerprint"));
  c.completed_epochs = std::stoll(tf.meta.at("completed_epochs"));
  c.completed_steps = std::stoll(tf.meta.at("completed_steps"));
  c.g_adam_steps = std::stoll(tf.meta.at("g_adam_steps"));
  c.d_adam_steps = std::stoll(tf.meta.at("d_adam_steps"));
  for (const auto& [name, t] : tf.tensors()) c.tensors[name] = t;
  return c;
}

namespace {

void restore_network(nn::NetworkF& net, const Checkpoint& c, const std::string& prefix) {
  auto copy_into = [&](nn::ParamRef<float> ref, const std::string& key) {
    const auto it = c.tensors.find(key);
    if (it == c.tensors.end())
      throw std::runtime_error("checkpoint: missing tensor " + key);
    if (!it->second.same_shape(*ref.value))
      throw std::runtime_error("checkpoint: shape mismatch for " + key);
    ref.value->v = it->second.v;
  };
  for (auto& p : net.params()) copy_into(p, prefix + "/param/" + p.name);
  for (auto& s : net.state()) copy_into(s, prefix + "/state/" + s.name);
}

}  // namespace

nn::NetworkF generator_from_checkpoint(const Checkpoint& c) {
  nn::NetworkF gen = build_generator(0);
  restore_network(gen, c, "g");
  return gen;
}

// ---- trainer ----

Trainer::Trainer(const TrainConfig& cfg)
    : Trainer(cfg, generator_spec(), discriminator_spec()) {}

Trainer::Trainer(const TrainConfig& cfg, const ArchitectureSpec& gen_spec,
                 const ArchitectureSpec& disc_spec)
    : cfg_(cfg),
      gen_(gen_spec, nn::Rng(cfg.seed).fork(0xA1).next_u64(), cfg.init_std),
      disc_(disc_spec, nn::Rng(cfg.seed).fork(0xB2).next_u64(), cfg.init_std) {
  validate(cfg_);
  gen_.bn_momentum = cfg_.bn_momentum;
  disc_.bn_momentum = cfg_.bn_momentum;
  adam_g_ = nn::Adam<float>(gen_.params(), cfg_.learning_rate, cfg_.beta_1,
                            cfg_.beta_2, cfg_.epsilon);
  adam_d_ = nn::Adam<float>(disc_.params(), cfg_.learning_rate, cfg_.beta_1,
                            cfg_.beta_2, cfg_.epsilon);
  fx_ = make_feature_extractor(cfg_.feature_extractor);
}

StepReport Trainer::train_step(const ImageTensor& blur_batch,
                               const ImageTensor& sharp_batch) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!blur_batch.same_shape(sharp_batch))
    throw std::invalid_argument("train_step: blur and sharp batch shapes differ");

  const double w_p = cfg_.loss_weights.perceptual_weight;
  const double w_a = cfg_.loss_weights.adversarial_weight;

  // one generator pass feeds both phases; the generator is untouched by the
  // critic updates, so the fake batch stays valid
  nn::NetCache<float> gcache;
  ImageTensor fake = gen_.forward(blur_batch, nn::ForwardMode::Train, &gcache);

  double d_loss = 0.0;
  std::vector<double> critic_scores_real, critic_scores_fake;
  for (int cs = 0; cs < cfg_.critic_steps_per_gen_step; ++cs) {
    disc_.zero_grads();
    nn::NetCache<float> dc_real, dc_fake;
    ImageTensor map_real = disc_.forward(sharp_batch, nn::ForwardMode::Train, &dc_real);
    ImageTensor map_fake = disc_.forward(fake, nn::ForwardMode::Train, &dc_fake);
    critic_scores_real = nn::spatial_mean_scores(map_real);
    critic_scores_fake = nn::spatial_mean_scores(map_fake);
    d_loss = wasserstein_critic_loss(critic_scores_real, critic_scores_fake);

    std::vector<double> g_real(critic_scores_real.size(),
                               -1.0 / static_cast<double>(critic_scores_real.size()));
    std::vector<double> g_fake(critic_scores_fake.size(),
                               1.0 / static_cast<double>(critic_scores_fake.size()));
    disc_.backward(dc_real, nn::spatial_mean_backward<float>(map_real.n, map_real.h,
                                                             map_real.w, g_real));
    disc_.backward(dc_fake, nn::spatial_mean_backward<float>(map_fake.n, map_fake.h,
                                                             map_fake.w, g_fake));
    adam_d_.step();
    if (cfg_.critic_weight_clip > 0) {
      const float clip = static_cast<float>(cfg_.critic_weight_clip);
      for (auto& p : disc_.params())
        for (auto& v : p.value->v) v = std::clamp(v, -clip, clip);
    }
  }

  // generator update against the (just updated) frozen critic
  gen_.zero_grads();
  nn::NetCache<float> dc_gen;
  ImageTensor map_gen = disc_.forward(fake, nn::ForwardMode::TrainFrozen, &dc_gen);
  const std::vector<double> scores_gen = nn::spatial_mean_scores(map_gen);
  const double g_adv = generator_adversarial_loss(scores_gen);

  std::unique_ptr<ExtractorContext> ctx_sharp, ctx_fake;
  const ImageTensor feat_sharp = fx_->forward_with_grad(sharp_batch, ctx_sharp);
  const ImageTensor feat_fake = fx_->forward_with_grad(fake, ctx_fake);
  const double g_perc = tensor_mse(feat_sharp, feat_fake);
  const double g_total = w_p * g_perc + w_a * g_adv;

  std::vector<double> g_scores(scores_gen.size(),
                               -w_a / static_cast<double>(scores_gen.size()));
  disc_.zero_grads();  // scratch; the critic is frozen during this pass
  ImageTensor d_fake = disc_.backward(
      dc_gen, nn::spatial_mean_backward<float>(map_gen.n, map_gen.h, map_gen.w, g_scores));

  ImageTensor g_feat = tensor_mse_grad(feat_sharp, feat_fake);
  for (auto& v : g_feat.v) v = static_cast<float>(v * w_p);
  ImageTensor d_perc = fx_->vjp(*ctx_fake, g_feat);
  for (size_t i = 0; i < d_fake.v.size(); ++i) d_fake.v[i] += d_perc.v[i];

  gen_.backward(gcache, d_fake);
  adam_g_.step();

  StepReport r;
  r.step = ++step_;
  r.d_loss = d_loss;
  r.g_loss_total = g_total;
  r.g_perceptual = g_perc;
  r.g_adversarial = g_adv;
  auto scores_finite = [](const std::vector<double>& s) {
    for (double v : s)
      if (!std::isfinite(v)) return false;
    return true;
  };
  r.eq1_value = scores_finite(critic_scores_real) && scores_finite(critic_scores_fake)
                    ? gan_value_estimate(critic_scores_real, critic_scores_fake)
                    : std::numeric_limits<double>::quiet_NaN();
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!r.all_finite()) throw TrainingAborted(r);
  return r;
}

namespace {

void crop_into(ImageTensor& batch, int index, const PixelImage& img, int r0, int c0,
               int patch) {
  for (int y = 0; y < patch; ++y)
    for (int x = 0; x < patch; ++x)
      for (int ch = 0; ch < img.channels; ++ch)
        batch.at(index, y, x, ch) =
            static_cast<float>(img.at(r0 + y, c0 + x, ch)) / 127.5f - 1.0f;
}

}  // namespace

Checkpoint Trainer::run(const std::function<void(const StepReport&)>& on_step,
                        const std::function<void(int64_t)>& on_epoch) {
  const DatasetManifest manifest = scan_manifest(cfg_.dataset_root, cfg_.split);
  nn::Rng data_rng = nn::Rng(cfg_.seed).fork(0xC3);

  const int pairs = static_cast<int>(manifest.entries.size());
  for (int64_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    nn::Rng epoch_rng = data_rng.fork(static_cast<uint64_t>(epoch) + 1);
    std::vector<int> order(pairs);
    for (int i = 0; i < pairs; ++i) order[i] = i;
    if (cfg_.shuffle)
      for (int i = pairs - 1; i > 0; --i)
        std::swap(order[i], order[epoch_rng.next_below(static_cast<uint64_t>(i) + 1)]);

    for (int start = 0; start < pairs; start += cfg_.batch_size) {
      const int count = std::min(cfg_.batch_size, pairs - start);
      ImageTensor blur_batch(count, cfg_.patch, cfg_.patch, 3);
      ImageTensor sharp_batch(count, cfg_.patch, cfg_.patch, 3);
      for (int b = 0; b < count; ++b) {
        const PairedSample s = load_pair(manifest.entries[order[start + b]]);
        if (s.sharp.channels != 3)
          throw std::runtime_error("pair " + s.id + ": training expects RGB images");
        if (s.sharp.height < cfg_.patch || s.sharp.width < cfg_.patch)
          throw std::runtime_error("pair " + s.id + " is smaller than the " +
                                   std::to_string(cfg_.patch) + "px training patch");
        const int r0 = static_cast<int>(
            epoch_rng.next_below(static_cast<uint64_t>(s.sharp.height - cfg_.patch) + 1));
        const int c0 = static_cast<int>(
            epoch_rng.next_below(static_cast<uint64_t>(s.sharp.width - cfg_.patch) + 1));
        crop_into(blur_batch, b, s.blur, r0, c0, cfg_.patch);
        crop_into(sharp_batch, b, s.sharp, r0, c0, cfg_.patch);
      }
      const StepReport report = train_step(blur_batch, sharp_batch);
      if (on_step) on_step(report);
    }
    ++epoch_;
    if (on_epoch) on_epoch(epoch_);
  }
  return make_checkpoint();
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint c;
  c.config_fingerprint = config_fingerprint(cfg_);
  c.completed_epochs = epoch_;
  c.completed_steps = step_;
  c.g_adam_steps = adam_g_.step_count();
  c.d_adam_steps = adam_d_.step_count();
  auto& self = const_cast<Trainer&>(*this);
  auto pack = [&](nn::NetworkF& net, nn::Adam<float>& adam, const std::string& prefix) {
    for (auto& p : net.params()) c.tensors[prefix + "/param/" + p.name] = *p.value;
    for (auto& s : net.state()) c.tensors[prefix + "/state/" + s.name] = *s.value;
    for (size_t i = 0; i < adam.size(); ++i) {
      c.tensors[prefix + "/m/" + adam.param(i).name] = adam.moment1(i);
      c.tensors[prefix + "/v/" + adam.param(i).name] = adam.moment2(i);
    }
  };
  pack(self.gen_, self.adam_g_, "g");
  pack(self.disc_, self.adam_d_, "d");
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  if (c.config_fingerprint != config_fingerprint(cfg_))
    std::cerr << "warning: checkpoint config fingerprint " << c.config_fingerprint
              << " differs from the active config " << config_fingerprint(cfg_)
              << "; loading anyway\n";
  restore_network(gen_, c, "g");
  restore_network(disc_, c, "d");
  auto load_moments = [&](nn::Adam<float>& adam, const std::string& prefix) {
    for (size_t i = 0; i < adam.size(); ++i) {
      const auto m = c.tensors.find(prefix + "/m/" + adam.param(i).name);
      const auto v = c.tensors.find(prefix + "/v/" + adam.param(i).name);
      if (m == c.tensors.end() || v == c.tensors.end())
        throw std::runtime_error("checkpoint: missing optimizer moments for " +
                                 adam.param(i).name);
      adam.moment1(i).v = m->second.v;
      adam.moment2(i).v = v->second.v;
    }
  };
  load_moments(adam_g_, "g");
  load_moments(adam_d_, "d");
  adam_g_.set_step_count(c.g_adam_steps);
  adam_d_.set_step_count(c.d_adam_steps);
  step_ = c.completed_steps;
  epoch_ = c.completed_epochs;
}

Checkpoint train(const TrainConfig& cfg) {
  validate(cfg);
  fs::create_directories(cfg.out_dir);
  Trainer trainer(cfg);
  std::ofstream log(fs::path(cfg.out_dir) / "steps.tsv", std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write step log under " + cfg.out_dir);
  log << StepReport::log_header() << "\n";

  const std::string ckpt_path = (fs::path(cfg.out_dir) / "checkpoint_latest.bin").string();
  Checkpoint final_ckpt;
  try {
    final_ckpt = trainer.run(
        [&](const StepReport& r) { log << r.to_log_line() << "\n" << std::flush; },
        [&](int64_t) { save_checkpoint(trainer.make_checkpoint(), ckpt_path); });
  } catch (const TrainingAborted& e) {
    log << "# aborted: " << e.what() << "\n";
    throw;
  }
  save_checkpoint(final_ckpt, ckpt_path);
  return final_ckpt;
}

}  // namespace deblur
