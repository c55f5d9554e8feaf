#include "deblur/architecture.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace deblur {

long long layer_param_count(const LayerSpec& layer) {
  return static_cast<long long>(layer.c_out) *
         (static_cast<long long>(layer.c_in) * layer.kernel * layer.kernel + 1);
}

long long norm_param_count(const LayerSpec& layer) {
  return layer.normalization ? 4LL * layer.c_out : 0LL;
}

namespace {

LayerSpec conv(std::string name, int k, int s, int cin, int cout, bool norm,
               Activation act, PadMode pad,
               LayerKind kind = LayerKind::Convolution) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  l.kernel = k;
  l.stride = s;
  l.c_in = cin;
  l.c_out = cout;
  l.normalization = norm;
  l.activation = act;
  l.padding = pad;
  return l;
}

void validate(const ArchitectureSpec& spec) {
  for (const auto& l : spec.layers)
    if (l.kernel < 1 || l.stride < 1 || l.c_in < 1 || l.c_out < 1)
      throw std::logic_error("LayerSpec " + l.name + ": all of K, S, C_in, C_out must be >= 1");
  for (const auto& p : spec.residual_pairs) {
    const auto& a = spec.layers.at(p.first_layer);
    const auto& b = spec.layers.at(p.second_layer);
    if (a.stride != 1 || b.stride != 1 || a.c_in != a.c_out || b.c_in != b.c_out)
      throw std::logic_error(spec.name + ": residual pair must keep shape (stride 1, C_in == C_out)");
  }
}

}  // namespace

ArchitectureSpec generator_spec() {
  ArchitectureSpec s;
  s.name = "generator";
  s.global_skip = true;

  s.layers.push_back(conv("conv2d", 7, 1, 3, 64, true, Activation::Relu, PadMode::Reflect));
  s.layers.push_back(conv("conv2d_1", 3, 2, 64, 128, true, Activation::Relu, PadMode::Zero));
  s.layers.push_back(conv("conv2d_2", 3, 2, 128, 256, true, Activation::Relu, PadMode::Zero));
  for (int b = 0; b < 9; ++b) {
    const int i = 3 + 2 * b;
    s.layers.push_back(conv("conv2d_" + std::to_string(i), 3, 1, 256, 256, true,
                            Activation::Relu, PadMode::Zero));
    s.layers.push_back(conv("conv2d_" + std::to_string(i + 1), 3, 1, 256, 256, true,
                            Activation::None, PadMode::Zero));
    s.residual_pairs.push_back({3 + 2 * b, 4 + 2 * b});
  }
  s.layers.push_back(conv("conv2d_21", 3, 1, 256, 128, true, Activation::Relu,
                          PadMode::Zero, LayerKind::UpsampleConvolution));
  s.layers.push_back(conv("conv2d_22", 3, 1, 128, 64, true, Activation::Relu,
                          PadMode::Zero, LayerKind::UpsampleConvolution));
  s.layers.push_back(conv("conv2d_23", 7, 1, 64, 3, false, Activation::Tanh, PadMode::Reflect));

  s.declared_layer_params = {9472,   73856,  295168, 590080, 590080, 590080,
                             590080, 590080, 590080, 590080, 590080, 590080,
                             590080, 590080, 590080, 590080, 590080, 590080,
                             590080, 590080, 590080, 295040, 73792,  9411};
  s.declared_total = 11399171;
  validate(s);
  return s;
}

ArchitectureSpec discriminator_spec() {
  ArchitectureSpec s;
  s.name = "discriminator";
  s.global_skip = false;

  s.layers.push_back(conv("conv2d_24", 4, 2, 3, 64, false, Activation::LeakyRelu, PadMode::Zero));
  s.layers.push_back(conv("conv2d_25", 4, 2, 64, 64, true, Activation::LeakyRelu, PadMode::Zero));
  s.layers.push_back(conv("conv2d_26", 4, 2, 64, 128, true, Activation::LeakyRelu, PadMode::Zero));
  s.layers.push_back(conv("conv2d_27", 4, 2, 128, 256, true, Activation::LeakyRelu, PadMode::Zero));
  s.layers.push_back(conv("conv2d_28", 4, 1, 256, 512, true, Activation::LeakyRelu, PadMode::Zero));
  s.layers.push_back(conv("conv2d_29", 4, 1, 512, 1, false, Activation::Sigmoid, PadMode::Zero));

  s.declared_layer_params = {3136, 65600, 131200, 524544, 2097664, 8193};
  s.declared_total = 3098370;
  validate(s);
  return s;
}

ArchitectureSpec scale_spec_width(const ArchitectureSpec& spec, int divisor) {
  if (divisor < 1) throw std::invalid_argument("scale_spec_width: divisor must be >= 1");
  ArchitectureSpec s = spec;
  s.name = spec.name + "_w" + std::to_string(divisor);
  s.declared_layer_params.clear();
  s.declared_total = -1;
  const int image_in = spec.layers.front().c_in;
  const int image_out = spec.layers.back().c_out;
  auto scale = [&](int c) {
    if (c == image_in || c == image_out) return c;
    return std::max(4, c / divisor);
  };
  for (size_t i = 0; i < s.layers.size(); ++i) {
    auto& l = s.layers[i];
    l.c_in = (i == 0) ? l.c_in : scale(l.c_in);
    l.c_out = (i + 1 == s.layers.size()) ? l.c_out : scale(l.c_out);
  }
  validate(s);
  return s;
}

AuditReport audit_architecture(const ArchitectureSpec& spec) {
  AuditReport r;
  r.network = spec.name;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    AuditRow row;
    row.name = l.name;
    row.kernel = l.kernel;
    row.stride = l.stride;
    row.c_in = l.c_in;
    row.c_out = l.c_out;
    row.computed = layer_param_count(l);
    row.norm_params = norm_param_count(l);
    if (i < spec.declared_layer_params.size()) {
      row.declared = spec.declared_layer_params[i];
      row.mismatch = row.declared != row.computed;
      if (row.mismatch)
        r.mismatches.push_back(l.name + ": computed " + std::to_string(row.computed) +
                               " vs declared " + std::to_string(row.declared));
    }
    r.conv_total += row.computed;
    r.norm_total += row.norm_params;
    r.rows.push_back(std::move(row));
  }
  r.grand_total = r.conv_total + r.norm_total;
  r.declared_total = spec.declared_total;
  if (spec.declared_total >= 0 && spec.declared_total != r.grand_total &&
      spec.declared_total != r.conv_total)
    r.total_discrepancy = spec.declared_total - r.conv_total;
  return r;
}

std::string AuditReport::to_text() const {
  std::ostringstream os;
  char buf[160];
  os << network << "\n";
  std::snprintf(buf, sizeof(buf), "%-12s %3s %3s %6s %6s %12s %12s %s\n", "layer", "K",
                "S", "C_in", "C_out", "#Parameters", "declared", "match");
  os << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %3d %3d %6d %6d %12lld %12lld %s\n",
                  row.name.c_str(), row.kernel, row.stride, row.c_in, row.c_out,
                  row.computed, row.declared, row.mismatch ? "MISMATCH" : "ok");
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "conv-only total      %12lld\n", conv_total);
  os << buf;
  std::snprintf(buf, sizeof(buf), "normalization total  %12lld\n", norm_total);
  os << buf;
  std::snprintf(buf, sizeof(buf), "grand total          %12lld\n", grand_total);
  os << buf;
  if (declared_total >= 0) {
    std::snprintf(buf, sizeof(buf), "published total      %12lld\n", declared_total);
    os << buf;
    if (total_discrepancy != 0) {
      std::snprintf(buf, sizeof(buf),
                    "NOTE: published total exceeds the per-layer sum by %lld "
                    "(known, documented; per-layer table is authoritative)\n",
                    total_discrepancy);
      os << buf;
    } else if (declared_total == grand_total) {
      os << "published total matches conv + normalization exactly\n";
    }
  }
  return os.str();
}

}  // namespace deblur
