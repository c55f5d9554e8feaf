#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deblur/data.hpp"
#include "deblur/image.hpp"
#include "deblur/nn/network.hpp"

namespace deblur {

// 10 * log10(255^2 / MSE) with the MSE over all pixels and channels.
// Identical images return +infinity.
double psnr(const PixelImage& a, const PixelImage& b);

// Mean structural similarity: 11x11 Gaussian window (sigma 1.5),
// C1 = (0.01*255)^2, C2 = (0.03*255)^2, C3 = C2/2 (folded), computed on the
// ITU-R 601 luma of color images. Set per_channel to average the three
// channel scores instead.
double ssim(const PixelImage& a, const PixelImage& b, bool per_channel = false);

struct MetricReport {
  struct PerImage {
    std::string id;
    double psnr = 0;
    double ssim = 0;
  };
  std::vector<PerImage> per_image;
  double psnr_max = 0, psnr_min = 0, psnr_mean = 0;
  double ssim_max = 0, ssim_min = 0, ssim_mean = 0;
  int infinite_psnr_count = 0;  // reported verbatim, excluded from the mean

  // metric | max | min | mean table plus notes
  std::string to_text() const;
  // one "id<TAB>psnr<TAB>ssim" line per image
  std::string to_index_text() const;
};

MetricReport aggregate_metrics(std::vector<MetricReport::PerImage> rows);

struct EvalOptions {
  int patch = 256;
  int stride = 128;
};

// Deblurs every pair in the manifest (tiled inference) and scores the result
// against the sharp target. A null generator scores the identity model:
// output = blurred input.
MetricReport evaluate_dataset(nn::NetworkF* generator, const DatasetManifest& manifest,
                              const EvalOptions& opts = {});

}  // namespace deblur
