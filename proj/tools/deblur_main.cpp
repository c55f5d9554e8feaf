#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "deblur/architecture.hpp"
#include "deblur/data.hpp"
#include "deblur/image_io.hpp"
#include "deblur/inference.hpp"
#include "deblur/metrics.hpp"
#include "deblur/model.hpp"
#include "deblur/training.hpp"

namespace fs = std::filesystem;
using namespace deblur;

namespace {

struct KeyedOption {
  std::string key;
  std::string value;
  bool set = false;
};

// Registers one CLI flag per config key so the two namespaces stay identical.
std::vector<std::shared_ptr<KeyedOption>> add_config_flags(CLI::App* cmd) {
  std::vector<std::shared_ptr<KeyedOption>> opts;
  for (const auto& key : train_config_keys()) {
    auto opt = std::make_shared<KeyedOption>();
    opt->key = key;
    cmd->add_option_function<std::string>(
           "--" + key,
           [opt](const std::string& v) {
             opt->value = v;
             opt->set = true;
           },
           "override config key '" + key + "'")
        ->type_name("VALUE");
    opts.push_back(std::move(opt));
  }
  return opts;
}

TrainConfig resolve_config(const std::string& config_path,
                           const std::vector<std::shared_ptr<KeyedOption>>& overrides) {
  TrainConfig cfg;  // built-in defaults
  if (!config_path.empty()) cfg = parse_train_config_file(config_path);
  for (const auto& o : overrides)
    if (o->set) apply_config_override(cfg, o->key, o->value);
  return cfg;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::shared_ptr<KeyedOption>>& overrides) {
  const TrainConfig cfg = resolve_config(config_path, overrides);
  validate(cfg);
  std::cout << "training configuration:\n" << to_text(cfg);
  const Checkpoint ckpt = train(cfg);
  std::cout << "finished " << ckpt.completed_epochs << " epochs, "
            << ckpt.completed_steps << " steps\n"
            << "checkpoint: " << (fs::path(cfg.out_dir) / "checkpoint_latest.bin").string()
            << "\nstep log:   " << (fs::path(cfg.out_dir) / "steps.tsv").string() << "\n";
  return 0;
}

int cmd_deblur(const std::string& checkpoint_path, const std::string& input,
               const std::string& output, int patch, int stride) {
  nn::NetworkF gen = generator_from_checkpoint(load_checkpoint(checkpoint_path));

  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file()) inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
  } else if (fs::is_regular_file(input)) {
    inputs.push_back(input);
  } else {
    throw std::runtime_error("no such input: " + input);
  }
  if (inputs.empty()) throw std::runtime_error("no images under " + input);

  fs::create_directories(output);
  TileOptions opts;
  opts.patch = patch;
  opts.stride = stride;
  for (const auto& path : inputs) {
    const PixelImage img = read_image(path.string());
    const PixelImage restored = deblur_image(gen, img, opts);
    const fs::path out = fs::path(output) / (path.stem().string() + ".png");
    write_png(out.string(), restored);
    std::cout << path.filename().string() << " -> " << out.string() << "  ("
              << img.width << "x" << img.height << ")\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, bool identity,
                 const std::string& root, const std::string& split,
                 const std::string& index_out, int patch, int stride) {
  const DatasetManifest manifest = scan_manifest(root, split);
  std::optional<nn::NetworkF> gen;
  if (!identity) {
    if (checkpoint_path.empty())
      throw std::runtime_error("evaluate needs --checkpoint or --identity");
    gen = generator_from_checkpoint(load_checkpoint(checkpoint_path));
  }
  EvalOptions opts;
  opts.patch = patch;
  opts.stride = stride;
  const MetricReport report = evaluate_dataset(gen ? &*gen : nullptr, manifest, opts);
  std::cout << (identity ? "identity baseline (output = blurred input)\n" : "")
            << report.to_text();
  if (!index_out.empty()) {
    std::ofstream f(index_out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + index_out);
    f << report.to_index_text();
    std::cout << "per-image index: " << index_out << "\n";
  }
  return 0;
}

int cmd_audit() {
  const AuditReport gen = audit_architecture(generator_spec());
  const AuditReport disc = audit_architecture(discriminator_spec());
  std::cout << gen.to_text() << "\n" << disc.to_text() << "\n";

  std::cout << "summary\n";
  std::cout << "  generator conv-only total:      " << gen.conv_total << "\n";
  std::cout << "  generator grand total:          " << gen.grand_total
            << (gen.grand_total == gen.declared_total ? "  (matches the published total)"
                                                      : "  (MISMATCH)")
            << "\n";
  std::cout << "  discriminator conv-only total:  " << disc.conv_total << "\n";
  if (disc.total_discrepancy != 0)
    std::cout << "  discriminator discrepancy:      " << disc.total_discrepancy
              << "  (published total vs per-layer sum; known, documented)\n";

  const bool per_layer_clean = gen.mismatches.empty() && disc.mismatches.empty();
  if (!per_layer_clean) {
    std::cout << "per-layer mismatches detected:\n";
    for (const auto& m : gen.mismatches) std::cout << "  " << m << "\n";
    for (const auto& m : disc.mismatches) std::cout << "  " << m << "\n";
  }
  return per_layer_clean ? 0 : 1;
}

int cmd_synth(int n, int size, uint64_t seed, const std::string& out,
              const std::string& split) {
  const DatasetManifest m = make_synthetic_dataset(n, size, seed, out, split);
  std::cout << "wrote " << m.entries.size() << " blur/sharp pairs under " << out << "/"
            << split << "\n";
  std::cout << m.to_index_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion-deblurring GAN workbench: train, deblur, evaluate, audit, synth"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the GAN on a paired dataset");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "key = value config file")
      ->check(CLI::ExistingFile);
  auto overrides = add_config_flags(train_cmd);

  // deblur
  auto* deblur_cmd = app.add_subcommand("deblur", "restore an image or a directory");
  std::string ckpt, input, output = "deblurred";
  int patch = 256, stride = 128;
  deblur_cmd->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  deblur_cmd->add_option("--input", input, "image file or directory")->required();
  deblur_cmd->add_option("--out", output, "output directory (default: deblurred)");
  deblur_cmd->add_option("--patch", patch, "inference tile size (default 256)");
  deblur_cmd->add_option("--stride", stride, "tile stride (default 128, 50% overlap)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a dataset split");
  std::string eval_ckpt, eval_root, eval_split = "test", eval_index;
  bool identity = false;
  int eval_patch = 256, eval_stride = 128;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint");
  eval_cmd->add_flag("--identity", identity, "score the blurred inputs themselves");
  eval_cmd->add_option("--dataset-root", eval_root, "dataset root")->required();
  eval_cmd->add_option("--split", eval_split, "dataset split (default: test)");
  eval_cmd->add_option("--index-out", eval_index, "write the per-image metric index here");
  eval_cmd->add_option("--patch", eval_patch, "inference tile size");
  eval_cmd->add_option("--stride", eval_stride, "tile stride");

  // audit
  app.add_subcommand("audit", "print the layer tables and parameter-count audit");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic blur/sharp dataset");
  int n = 8, size = 64;
  uint64_t seed = 7;
  std::string synth_out, synth_split = "train";
  synth_cmd->add_option("--n", n, "number of pairs (default 8)");
  synth_cmd->add_option("--size", size, "image size in pixels, >= 32 (default 64)");
  synth_cmd->add_option("--seed", seed, "generator seed (default 7)");
  synth_cmd->add_option("--out", synth_out, "output dataset root")->required();
  synth_cmd->add_option("--split", synth_split, "split directory name (default: train)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train")) return cmd_train(train_config, overrides);
    if (app.got_subcommand("deblur")) return cmd_deblur(ckpt, input, output, patch, stride);
    if (app.got_subcommand("evaluate"))
      return cmd_evaluate(eval_ckpt, identity, eval_root, eval_split, eval_index,
                          eval_patch, eval_stride);
    if (app.got_subcommand("audit")) return cmd_audit();
    if (app.got_subcommand("synth")) return cmd_synth(n, size, seed, synth_out, synth_split);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
