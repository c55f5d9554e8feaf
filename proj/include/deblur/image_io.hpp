#pragma once

#include <string>

#include "deblur/image.hpp"

namespace deblur {

// PNG or JPEG by file extension (.png / .jpg / .jpeg, case-insensitive).
// 8-bit only; palette and gray+alpha inputs are expanded, alpha is dropped.
PixelImage read_image(const std::string& path);
void write_image(const std::string& path, const PixelImage& img);

PixelImage read_png(const std::string& path);
void write_png(const std::string& path, const PixelImage& img);
PixelImage read_jpeg(const std::string& path);
void write_jpeg(const std::string& path, const PixelImage& img, int quality = 95);

}  // namespace deblur
