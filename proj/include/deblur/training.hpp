#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "deblur/data.hpp"
#include "deblur/image.hpp"
#include "deblur/losses.hpp"
#include "deblur/nn/adam.hpp"
#include "deblur/nn/network.hpp"

namespace deblur {

struct TrainConfig {
  int batch_size = 16;
  int epochs = 40;
  double learning_rate = 1e-4;
  double beta_1 = 0.9;
  double beta_2 = 0.999;
  double epsilon = 1e-8;
  int patch = 256;
  int critic_steps_per_gen_step = 1;
  LossWeights loss_weights;
  uint64_t seed = 7;
  std::string dataset_root;
  std::string split = "train";
  // plumbing knobs beyond the published hyperparameters
  std::string feature_extractor = "identity";
  std::string out_dir = "runs/out";
  double critic_weight_clip = 0.0;  // 0 disables clipping
  bool shuffle = true;
  double bn_momentum = 0.9;
  double init_std = 0.02;
};

void validate(const TrainConfig& cfg);

// The config-file / CLI-override key namespace (one shared list).
const std::vector<std::string>& train_config_keys();
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value);
TrainConfig parse_train_config_file(const std::string& path);
std::string to_text(const TrainConfig& cfg);      // canonical key = value form
uint64_t config_fingerprint(const TrainConfig& cfg);

struct StepReport {
  int64_t step = 0;
  double d_loss = 0;
  double g_loss_total = 0;
  double g_perceptual = 0;
  double g_adversarial = 0;
  double eq1_value = 0;
  double wall_time = 0;  // seconds; informational, not part of determinism

  bool all_finite() const;
  std::string to_log_line() const;  // tab-separated fields, step first
  static std::string log_header();
};

struct Checkpoint {
  uint64_t config_fingerprint = 0;
  int64_t completed_epochs = 0;
  int64_t completed_steps = 0;
  std::map<std::string, nn::TensorF> tensors;
  int64_t g_adam_steps = 0;
  int64_t d_adam_steps = 0;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Restores generator weights/state from a checkpoint into a fresh network.
nn::NetworkF generator_from_checkpoint(const Checkpoint& c);

// Thrown when a loss turns non-finite; carries the offending report.
struct TrainingAborted : std::runtime_error {
  StepReport last_report;
  explicit TrainingAborted(const StepReport& r)
      : std::runtime_error("training aborted: non-finite loss at step " +
                           std::to_string(r.step)),
        last_report(r) {}
};

// Alternating critic/generator updates per the published protocol. Owns both
// networks and their optimizers; single-threaded over parameters.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  // test hook: width-reduced or otherwise customized specs
  Trainer(const TrainConfig& cfg, const ArchitectureSpec& gen_spec,
          const ArchitectureSpec& disc_spec);
  Trainer(const Trainer&) = delete;             // optimizers hold pointers
  Trainer& operator=(const Trainer&) = delete;  // into the networks

  // One alternating update on normalized [-1,1] patch batches.
  StepReport train_step(const ImageTensor& blur_batch, const ImageTensor& sharp_batch);

  // Full protocol: epochs x ceil(pairs / batch_size) steps, one random patch
  // position per pair per epoch, checkpoint per epoch. on_step may be null.
  Checkpoint run(const std::function<void(const StepReport&)>& on_step = {},
                 const std::function<void(int64_t)>& on_epoch = {});

  Checkpoint make_checkpoint() const;
  void restore(const Checkpoint& c);

  nn::NetworkF& generator() { return gen_; }
  nn::NetworkF& discriminator() { return disc_; }
  const TrainConfig& config() const { return cfg_; }
  int64_t global_step() const { return step_; }

 private:
  TrainConfig cfg_;
  nn::NetworkF gen_, disc_;
  nn::Adam<float> adam_g_, adam_d_;
  std::unique_ptr<FeatureExtractor> fx_;
  int64_t step_ = 0;
  int64_t epoch_ = 0;
};

// [OP] train: builds a Trainer, writes steps.tsv and checkpoint_latest.bin
// under cfg.out_dir, returns the final checkpoint.
Checkpoint train(const TrainConfig& cfg);

}  // namespace deblur
