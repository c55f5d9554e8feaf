#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "deblur/nn/tensor.hpp"

namespace deblur {

// Model-facing tensor type: values in [-1, 1], channels-last.
using ImageTensor = nn::Tensor<float>;

// 8-bit image, channels-last, 1 or 3 channels.
struct PixelImage {
  int height = 0, width = 0, channels = 0;
  std::vector<uint8_t> data;

  PixelImage() = default;
  PixelImage(int h, int w, int c);

  uint8_t& at(int y, int x, int ch) {
    return data[(static_cast<size_t>(y) * width + x) * channels + ch];
  }
  uint8_t at(int y, int x, int ch) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + ch];
  }
  bool same_shape(const PixelImage& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

struct PatchGrid {
  int patch_size = 0;
  int source_height = 0, source_width = 0;
  std::vector<std::pair<int, int>> positions;  // (row, col) offsets
};

// v -> v / 127.5 - 1, with a singleton batch dimension.
ImageTensor normalize(const PixelImage& img);

// v -> round((v + 1) * 127.5) clamped to [0, 255]; round-half-up so that
// normalize -> denormalize restores every 8-bit value exactly.
PixelImage denormalize(const ImageTensor& t, int batch_index = 0);

// Offsets 0, stride, 2*stride, ... plus a final offset snapped to dim - patch
// so the border is covered; duplicates removed.
PatchGrid plan_patches(int height, int width, int patch, int stride);

// One patch tensor per grid position, taken from batch element 0.
std::vector<ImageTensor> extract_patches(const ImageTensor& t, const PatchGrid& grid);

// Uniform averaging over overlaps; exact inverse of extract_patches when
// stride == patch.
ImageTensor assemble_patches(const std::vector<ImageTensor>& patches, const PatchGrid& grid);

}  // namespace deblur
