#pragma once

#include "deblur/image.hpp"
#include "deblur/nn/network.hpp"

namespace deblur {

struct TileOptions {
  int patch = 256;   // clamped to the image and floored to a multiple of 4
  int stride = 128;  // clamped to the effective patch
  int max_batch = 4; // patches per forward pass
};

// Full-image deblurring: cover the image with patches, run the generator in
// inference mode, blend overlaps by uniform averaging.
PixelImage deblur_image(nn::NetworkF& generator, const PixelImage& input,
                        const TileOptions& opts = {});

}  // namespace deblur
