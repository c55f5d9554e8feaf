#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deblur {

enum class Activation { None, Relu, LeakyRelu, Tanh, Sigmoid };
enum class PadMode { Zero, Reflect };
enum class LayerKind { Convolution, UpsampleConvolution };

// One table row: a conv layer plus its normalization/activation annotations.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Convolution;
  int kernel = 3;
  int stride = 1;
  int c_in = 1;
  int c_out = 1;
  bool normalization = false;
  Activation activation = Activation::None;
  PadMode padding = PadMode::Zero;
};

struct ResidualPair {
  int first_layer = -1;   // index of the block's first conv
  int second_layer = -1;  // index of the block's second conv; its output is
                          // added to the block input, no activation after
};

struct ArchitectureSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<ResidualPair> residual_pairs;
  bool global_skip = false;
  // Published reference counts the audit checks against. declared_layer_params
  // is row-for-row with layers; totals of -1 mean "not published".
  std::vector<long long> declared_layer_params;
  long long declared_total = -1;
};

// conv parameters = C_out * (C_in * K^2 + 1)
long long layer_param_count(const LayerSpec& layer);

// 4 * C_out when the layer is normalized (scale, shift, running mean,
// running variance), else 0.
long long norm_param_count(const LayerSpec& layer);

ArchitectureSpec generator_spec();
ArchitectureSpec discriminator_spec();

// Width-reduced variant for tests: interior channel counts divided by
// `divisor` (floored at 4); image-facing channels are kept as declared.
ArchitectureSpec scale_spec_width(const ArchitectureSpec& spec, int divisor);

struct AuditRow {
  std::string name;
  int kernel = 0, stride = 0, c_in = 0, c_out = 0;
  long long computed = 0;
  long long declared = -1;
  long long norm_params = 0;
  bool mismatch = false;
};

struct AuditReport {
  std::string network;
  std::vector<AuditRow> rows;
  long long conv_total = 0;
  long long norm_total = 0;
  long long grand_total = 0;
  long long declared_total = -1;
  std::vector<std::string> mismatches;  // per-layer disagreements (empty = clean)
  // declared_total - conv_total when the published total disagrees; the
  // discriminator table is known to carry one.
  long long total_discrepancy = 0;

  std::string to_text() const;
};

AuditReport audit_architecture(const ArchitectureSpec& spec);

}  // namespace deblur
