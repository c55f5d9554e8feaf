#include "deblur/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "deblur/image_io.hpp"
#include "deblur/nn/rng.hpp"

namespace fs = std::filesystem;

namespace deblur {

std::string DatasetManifest::to_index_text() const {
  std::ostringstream os;
  for (const auto& e : entries)
    os << e.id << '\t' << e.blur_path << '\t' << e.sharp_path << '\n';
  return os.str();
}

namespace {

std::vector<std::string> sorted_files(const fs::path& dir) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) return names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

DatasetManifest scan_manifest(const std::string& root, const std::string& split) {
  const fs::path base = fs::path(root) / split;
  if (!fs::is_directory(base))
    throw std::runtime_error("scan_manifest: no such split directory: " + base.string());

  std::vector<std::string> sequences;
  for (const auto& e : fs::directory_iterator(base))
    if (e.is_directory()) sequences.push_back(e.path().filename().string());
  std::sort(sequences.begin(), sequences.end());

  DatasetManifest m;
  m.root = root;
  m.split = split;
  std::vector<std::string> orphans;
  for (const auto& seq : sequences) {
    const fs::path blur_dir = base / seq / "blur";
    const fs::path sharp_dir = base / seq / "sharp";
    const auto blur_files = sorted_files(blur_dir);
    const auto sharp_files = sorted_files(sharp_dir);
    for (const auto& f : blur_files) {
      if (std::binary_search(sharp_files.begin(), sharp_files.end(), f)) {
        ManifestEntry e;
        e.id = seq + "/" + fs::path(f).stem().string();
        e.blur_path = (blur_dir / f).string();
        e.sharp_path = (sharp_dir / f).string();
        m.entries.push_back(std::move(e));
      } else {
        orphans.push_back((blur_dir / f).string() + " (no sharp counterpart)");
      }
    }
    for (const auto& f : sharp_files)
      if (!std::binary_search(blur_files.begin(), blur_files.end(), f))
        orphans.push_back((sharp_dir / f).string() + " (no blur counterpart)");
  }
  if (!orphans.empty()) {
    std::string msg = "scan_manifest: unpaired files:";
    for (const auto& o : orphans) msg += "\n  " + o;
    throw std::runtime_error(msg);
  }
  if (m.entries.empty())
    throw std::runtime_error("scan_manifest: no image pairs under " + base.string());
  return m;
}

PairedSample load_pair(const ManifestEntry& entry) {
  PairedSample s;
  s.id = entry.id;
  s.blur = read_image(entry.blur_path);
  s.sharp = read_image(entry.sharp_path);
  if (!s.blur.same_shape(s.sharp))
    throw std::runtime_error("pair " + entry.id + ": blur and sharp dimensions differ");
  return s;
}

MotionBlurKernel make_kernel(int length, double angle) {
  if (length < 1) throw std::invalid_argument("make_kernel: length must be >= 1");
  angle = angle - 180.0 * std::floor(angle / 180.0);  // into [0, 180)

  const double rad = angle * (3.14159265358979323846 / 180.0);
  double dx = std::cos(rad);
  double dy = -std::sin(rad);  // y grows downward
  // snap the axis-aligned cases so no phantom taps appear
  if (std::abs(dx) < 1e-12) dx = 0.0;
  if (std::abs(dy) < 1e-12) dy = 0.0;
  const double half = (length - 1) / 2.0;
  const int hx = static_cast<int>(std::ceil(std::abs(dx) * half)) + 1;
  const int hy = static_cast<int>(std::ceil(std::abs(dy) * half)) + 1;
  const int rows = 2 * hy + 1, cols = 2 * hx + 1;
  std::vector<double> taps(static_cast<size_t>(rows) * cols, 0.0);

  // unit samples along the segment, bilinearly splatted
  const double wgt = 1.0 / length;
  for (int i = 0; i < length; ++i) {
    const double t = i - half;
    const double px = hx + t * dx;
    const double py = hy + t * dy;
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0;
    const double fy = py - y0;
    taps[static_cast<size_t>(y0) * cols + x0] += wgt * (1 - fx) * (1 - fy);
    taps[static_cast<size_t>(y0) * cols + x0 + 1] += wgt * fx * (1 - fy);
    taps[static_cast<size_t>(y0 + 1) * cols + x0] += wgt * (1 - fx) * fy;
    taps[static_cast<size_t>(y0 + 1) * cols + x0 + 1] += wgt * fx * fy;
  }

  // trim all-zero borders
  int r0 = 0, r1 = rows - 1, c0 = 0, c1 = cols - 1;
  auto row_zero = [&](int r) {
    for (int c = 0; c < cols; ++c)
      if (taps[static_cast<size_t>(r) * cols + c] != 0.0) return false;
    return true;
  };
  auto col_zero = [&](int c) {
    for (int r = 0; r < rows; ++r)
      if (taps[static_cast<size_t>(r) * cols + c] != 0.0) return false;
    return true;
  };
  while (r0 < r1 && row_zero(r0)) ++r0;
  while (r1 > r0 && row_zero(r1)) --r1;
  while (c0 < c1 && col_zero(c0)) ++c0;
  while (c1 > c0 && col_zero(c1)) --c1;

  MotionBlurKernel k;
  k.length = length;
  k.angle = angle;
  k.rows = r1 - r0 + 1;
  k.cols = c1 - c0 + 1;
  k.taps.resize(static_cast<size_t>(k.rows) * k.cols);
  double total = 0.0;
  for (int r = 0; r < k.rows; ++r)
    for (int c = 0; c < k.cols; ++c) {
      k.taps[static_cast<size_t>(r) * k.cols + c] =
          taps[static_cast<size_t>(r + r0) * cols + (c + c0)];
      total += k.taps[static_cast<size_t>(r) * k.cols + c];
    }
  for (auto& t : k.taps) t /= total;
  return k;
}

namespace {

int reflect101(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

PixelImage apply_blur(const PixelImage& img, const MotionBlurKernel& k) {
  if (k.rows >= img.height || k.cols >= img.width)
    throw std::invalid_argument("apply_blur: kernel does not fit inside the image");
  PixelImage out(img.height, img.width, img.channels);
  const int cy = k.rows / 2, cx = k.cols / 2;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (int r = 0; r < k.rows; ++r) {
          const int sy = reflect101(y + r - cy, img.height);
          for (int c = 0; c < k.cols; ++c) {
            const int sx = reflect101(x + c - cx, img.width);
            acc += k.at(r, c) * img.at(sy, sx, ch);
          }
        }
        out.at(y, x, ch) = static_cast<uint8_t>(
            std::clamp(std::floor(acc + 0.5), 0.0, 255.0));
      }
  return out;
}

namespace {

void fill_rect(PixelImage& img, int y0, int x0, int y1, int x1, const uint8_t rgb[3]) {
  y0 = std::clamp(y0, 0, img.height - 1);
  y1 = std::clamp(y1, 0, img.height - 1);
  x0 = std::clamp(x0, 0, img.width - 1);
  x1 = std::clamp(x1, 0, img.width - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = rgb[c];
}

void fill_circle(PixelImage& img, int cy, int cx, int radius, const uint8_t rgb[3]) {
  for (int y = std::max(0, cy - radius); y <= std::min(img.height - 1, cy + radius); ++y)
    for (int x = std::max(0, cx - radius); x <= std::min(img.width - 1, cx + radius); ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius)
        for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = rgb[c];
}

void fill_bar(PixelImage& img, int y, int thickness, const uint8_t rgb[3]) {
  fill_rect(img, y, 0, y + thickness - 1, img.width - 1, rgb);
}

PixelImage render_scene(int size, nn::Rng& rng) {
  PixelImage img(size, size, 3);
  uint8_t bg[3];
  for (auto& v : bg) v = static_cast<uint8_t>(40 + rng.next_below(176));
  fill_rect(img, 0, 0, size - 1, size - 1, bg);
  const int shapes = 3 + static_cast<int>(rng.next_below(4));
  for (int s = 0; s < shapes; ++s) {
    uint8_t rgb[3];
    for (auto& v : rgb) v = static_cast<uint8_t>(rng.next_below(256));
    const int kind = static_cast<int>(rng.next_below(3));
    if (kind == 0) {
      const int y = static_cast<int>(rng.next_below(size));
      const int x = static_cast<int>(rng.next_below(size));
      const int h = 4 + static_cast<int>(rng.next_below(size / 2));
      const int w = 4 + static_cast<int>(rng.next_below(size / 2));
      fill_rect(img, y, x, y + h, x + w, rgb);
    } else if (kind == 1) {
      const int cy = static_cast<int>(rng.next_below(size));
      const int cx = static_cast<int>(rng.next_below(size));
      const int r = 3 + static_cast<int>(rng.next_below(size / 3));
      fill_circle(img, cy, cx, r, rgb);
    } else {
      const int y = static_cast<int>(rng.next_below(size - 4));
      const int t = 2 + static_cast<int>(rng.next_below(4));
      fill_bar(img, y, t, rgb);
    }
  }
  return img;
}

}  // namespace

DatasetManifest make_synthetic_dataset(int n, int size, uint64_t seed,
                                       const std::string& out_root,
                                       const std::string& split) {
  if (n < 1) throw std::invalid_argument("make_synthetic_dataset: n must be >= 1");
  if (size < 32) throw std::invalid_argument("make_synthetic_dataset: size must be >= 32");

  const fs::path seq = fs::path(out_root) / split / "seq000";
  std::error_code ec;
  fs::create_directories(seq / "blur", ec);
  fs::create_directories(seq / "sharp", ec);
  if (!fs::is_directory(seq / "blur") || !fs::is_directory(seq / "sharp"))
    throw std::runtime_error("make_synthetic_dataset: cannot create " + seq.string());

  nn::Rng master(seed);
  for (int i = 0; i < n; ++i) {
    nn::Rng rng = master.fork(static_cast<uint64_t>(i) + 1);
    PixelImage sharp = render_scene(size, rng);
    const int length = 3 + static_cast<int>(rng.next_below(13));  // [3, 15]
    const double angle = rng.uniform(0.0, 180.0);
    PixelImage blur = apply_blur(sharp, make_kernel(length, angle));
    char name[32];
    std::snprintf(name, sizeof(name), "im_%04d.png", i);
    write_png((seq / "sharp" / name).string(), sharp);
    write_png((seq / "blur" / name).string(), blur);
  }
  return scan_manifest(out_root, split);
}

}  // namespace deblur
