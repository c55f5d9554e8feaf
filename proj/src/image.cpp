#include "deblur/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace deblur {

PixelImage::PixelImage(int h, int w, int c)
    : height(h), width(w), channels(c),
      data(static_cast<size_t>(h) * w * c, 0) {
  if (h < 1 || w < 1 || (c != 1 && c != 3))
    throw std::invalid_argument("PixelImage: bad shape " + std::to_string(h) + "x" +
                                std::to_string(w) + "x" + std::to_string(c));
}

ImageTensor normalize(const PixelImage& img) {
  ImageTensor t(1, img.height, img.width, img.channels);
  const size_t n = img.data.size();
  for (size_t i = 0; i < n; ++i)
    t.v[i] = static_cast<float>(img.data[i]) / 127.5f - 1.0f;
  return t;
}

PixelImage denormalize(const ImageTensor& t, int batch_index) {
  if (batch_index < 0 || batch_index >= t.n)
    throw std::out_of_range("denormalize: batch index out of range");
  PixelImage img(t.h, t.w, t.c);
  const size_t per = static_cast<size_t>(t.h) * t.w * t.c;
  const float* src = t.data() + per * batch_index;
  for (size_t i = 0; i < per; ++i) {
    const double u = (static_cast<double>(src[i]) + 1.0) * 127.5;
    const double r = std::floor(u + 0.5);  // round half up
    img.data[i] = static_cast<uint8_t>(std::clamp(r, 0.0, 255.0));
  }
  return img;
}

namespace {

std::vector<int> axis_offsets(int dim, int patch, int stride) {
  std::vector<int> offs;
  for (int o = 0; o + patch <= dim; o += stride) offs.push_back(o);
  const int last = dim - patch;
  if (offs.empty() || offs.back() != last) offs.push_back(last);
  return offs;
}

}  // namespace

PatchGrid plan_patches(int height, int width, int patch, int stride) {
  if (patch > height || patch > width)
    throw std::invalid_argument(
        "plan_patches: image " + std::to_string(height) + "x" + std::to_string(width) +
        " is smaller than the " + std::to_string(patch) +
        "px patch; pad or resize the input first");
  if (stride < 1 || stride > patch)
    throw std::invalid_argument("plan_patches: stride must be in [1, patch]");
  PatchGrid grid;
  grid.patch_size = patch;
  grid.source_height = height;
  grid.source_width = width;
  const auto rows = axis_offsets(height, patch, stride);
  const auto cols = axis_offsets(width, patch, stride);
  for (int r : rows)
    for (int c : cols) grid.positions.emplace_back(r, c);
  return grid;
}

std::vector<ImageTensor> extract_patches(const ImageTensor& t, const PatchGrid& grid) {
  if (t.h != grid.source_height || t.w != grid.source_width)
    throw std::invalid_argument("extract_patches: tensor shape does not match grid");
  std::vector<ImageTensor> out;
  out.reserve(grid.positions.size());
  const int p = grid.patch_size;
  for (auto [r, c] : grid.positions) {
    ImageTensor patch(1, p, p, t.c);
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < t.c; ++ch)
          patch.at(0, y, x, ch) = t.at(0, r + y, c + x, ch);
    out.push_back(std::move(patch));
  }
  return out;
}

ImageTensor assemble_patches(const std::vector<ImageTensor>& patches, const PatchGrid& grid) {
  if (patches.size() != grid.positions.size())
    throw std::invalid_argument("assemble_patches: got " + std::to_string(patches.size()) +
                                " patches for " + std::to_string(grid.positions.size()) +
                                " grid positions");
  if (patches.empty()) throw std::invalid_argument("assemble_patches: empty grid");
  const int c = patches.front().c;
  const int p = grid.patch_size;
  nn::Tensor<double> acc(1, grid.source_height, grid.source_width, c);
  std::vector<uint32_t> hits(static_cast<size_t>(grid.source_height) * grid.source_width, 0);
  for (size_t i = 0; i < patches.size(); ++i) {
    const auto& patch = patches[i];
    if (patch.n != 1 || patch.h != p || patch.w != p || patch.c != c)
      throw std::invalid_argument("assemble_patches: patch " + std::to_string(i) +
                                  " has shape " + patch.shape_str());
    const auto [r, cc] = grid.positions[i];
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x) {
        hits[static_cast<size_t>(r + y) * grid.source_width + (cc + x)] += 1;
        for (int ch = 0; ch < c; ++ch)
          acc.at(0, r + y, cc + x, ch) += patch.at(0, y, x, ch);
      }
  }
  ImageTensor out(1, grid.source_height, grid.source_width, c);
  for (int y = 0; y < grid.source_height; ++y)
    for (int x = 0; x < grid.source_width; ++x) {
      const uint32_t hit = hits[static_cast<size_t>(y) * grid.source_width + x];
      for (int ch = 0; ch < c; ++ch)
        out.at(0, y, x, ch) = static_cast<float>(acc.at(0, y, x, ch) / hit);
    }
  return out;
}

}  // namespace deblur
