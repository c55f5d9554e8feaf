#include "deblur/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "deblur/inference.hpp"

namespace deblur {

double psnr(const PixelImage& a, const PixelImage& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("psnr: image shapes differ");
  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

const std::vector<double>& gaussian_taps() {
  static const std::vector<double> taps = [] {
    std::vector<double> t(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      t[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
      sum += t[i];
    }
    for (auto& v : t) v /= sum;
    return t;
  }();
  return taps;
}

// separable valid-mode Gaussian filter; in is h x w, out is (h-10) x (w-10)
std::vector<double> gauss_valid(const std::vector<double>& in, int h, int w) {
  const auto& g = gaussian_taps();
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * in[static_cast<size_t>(y) * w + x + k];
      tmp[static_cast<size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * tmp[static_cast<size_t>(y + k) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  return out;
}

double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int h, int w) {
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu1 = gauss_valid(x, h, w);
  const auto mu2 = gauss_valid(y, h, w);
  const auto sxx = gauss_valid(xx, h, w);
  const auto syy = gauss_valid(yy, h, w);
  const auto sxy = gauss_valid(xy, h, w);
  double total = 0.0;
  for (size_t i = 0; i < mu1.size(); ++i) {
    const double m1 = mu1[i], m2 = mu2[i];
    const double var1 = sxx[i] - m1 * m1;
    const double var2 = syy[i] - m2 * m2;
    const double cov = sxy[i] - m1 * m2;
    // luminance * contrast * structure with C3 = C2/2 folded into one ratio
    const double num = (2 * m1 * m2 + kC1) * (2 * cov + kC2);
    const double den = (m1 * m1 + m2 * m2 + kC1) * (var1 + var2 + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mu1.size());
}

std::vector<double> luma_plane(const PixelImage& img) {
  std::vector<double> out(static_cast<size_t>(img.height) * img.width);
  if (img.channels == 1) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = img.data[i];
    return out;
  }
  for (size_t i = 0; i < out.size(); ++i) {
    const uint8_t* px = img.data.data() + i * 3;
    out[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

std::vector<double> channel_plane(const PixelImage& img, int ch) {
  std::vector<double> out(static_cast<size_t>(img.height) * img.width);
  for (size_t i = 0; i < out.size(); ++i) out[i] = img.data[i * img.channels + ch];
  return out;
}

}  // namespace

double ssim(const PixelImage& a, const PixelImage& b, bool per_channel) {
  if (!a.same_shape(b))
    throw std::invalid_argument("ssim: image shapes differ");
  if (a.height < kWindow || a.width < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  if (!per_channel || a.channels == 1)
    return ssim_plane(luma_plane(a), luma_plane(b), a.height, a.width);
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c)
    total += ssim_plane(channel_plane(a, c), channel_plane(b, c), a.height, a.width);
  return total / a.channels;
}

MetricReport aggregate_metrics(std::vector<MetricReport::PerImage> rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate_metrics: no entries");
  MetricReport r;
  r.per_image = std::move(rows);
  r.psnr_max = -std::numeric_limits<double>::infinity();
  r.psnr_min = std::numeric_limits<double>::infinity();
  r.ssim_max = -std::numeric_limits<double>::infinity();
  r.ssim_min = std::numeric_limits<double>::infinity();
  double psnr_sum = 0.0, ssim_sum = 0.0;
  int finite = 0;
  for (const auto& row : r.per_image) {
    r.psnr_max = std::max(r.psnr_max, row.psnr);
    r.psnr_min = std::min(r.psnr_min, row.psnr);
    r.ssim_max = std::max(r.ssim_max, row.ssim);
    r.ssim_min = std::min(r.ssim_min, row.ssim);
    ssim_sum += row.ssim;
    if (std::isinf(row.psnr)) {
      ++r.infinite_psnr_count;
    } else {
      psnr_sum += row.psnr;
      ++finite;
    }
  }
  r.psnr_mean = finite ? psnr_sum / finite : std::numeric_limits<double>::infinity();
  r.ssim_mean = ssim_sum / static_cast<double>(r.per_image.size());
  return r;
}

std::string MetricReport::to_text() const {
  char buf[160];
  std::ostringstream os;
  std::snprintf(buf, sizeof(buf), "%-18s %14s %14s %14s\n", "Evaluation metric",
                "Maximum value", "Minimum value", "Mean value");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-18s %14.2f %14.2f %14.2f\n", "PSNR", psnr_max,
                psnr_min, psnr_mean);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-18s %14.2f %14.2f %14.2f\n", "SSIM", ssim_max,
                ssim_min, ssim_mean);
  os << buf;
  std::snprintf(buf, sizeof(buf), "images: %zu\n", per_image.size());
  os << buf;
  if (infinite_psnr_count > 0) {
    std::snprintf(buf, sizeof(buf),
                  "note: %d image(s) with infinite PSNR excluded from the mean\n",
                  infinite_psnr_count);
    os << buf;
  }
  return os.str();
}

std::string MetricReport::to_index_text() const {
  std::ostringstream os;
  char buf[160];
  for (const auto& row : per_image) {
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\n", row.id.c_str(), row.psnr, row.ssim);
    os << buf;
  }
  return os.str();
}

MetricReport evaluate_dataset(nn::NetworkF* generator, const DatasetManifest& manifest,
                              const EvalOptions& opts) {
  if (manifest.entries.empty())
    throw std::invalid_argument("evaluate_dataset: empty manifest");
  std::vector<MetricReport::PerImage> rows;
  rows.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const PairedSample pair = load_pair(entry);
    PixelImage restored =
        generator ? deblur_image(*generator, pair.blur, {opts.patch, opts.stride})
                  : pair.blur;
    MetricReport::PerImage row;
    row.id = pair.id;
    row.psnr = psnr(restored, pair.sharp);
    row.ssim = ssim(restored, pair.sharp);
    rows.push_back(std::move(row));
  }
  return aggregate_metrics(std::move(rows));
}

}  // namespace deblur
