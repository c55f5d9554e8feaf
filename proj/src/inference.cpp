#include "deblur/inference.hpp"

#include <algorithm>
#include <stdexcept>

#include "deblur/model.hpp"

namespace deblur {

PixelImage deblur_image(nn::NetworkF& generator, const PixelImage& input,
                        const TileOptions& opts) {
  if (input.channels != 3)
    throw std::invalid_argument("deblur_image: expected an RGB image");
  if (input.height < 8 || input.width < 8)
    throw std::invalid_argument("deblur_image: image must be at least 8x8");

  int patch = std::min({opts.patch, input.height, input.width});
  patch -= patch % 4;
  if (patch < 8)
    throw std::invalid_argument("deblur_image: effective patch is below the 8px minimum");
  const int stride = std::clamp(opts.stride, 1, patch);

  const ImageTensor full = normalize(input);
  const PatchGrid grid = plan_patches(input.height, input.width, patch, stride);
  std::vector<ImageTensor> patches = extract_patches(full, grid);

  // batch patches through the generator
  const int batch = std::max(1, opts.max_batch);
  for (size_t start = 0; start < patches.size(); start += batch) {
    const int count = static_cast<int>(std::min<size_t>(batch, patches.size() - start));
    ImageTensor stacked(count, patch, patch, 3);
    const size_t per = static_cast<size_t>(patch) * patch * 3;
    for (int b = 0; b < count; ++b)
      std::copy_n(patches[start + b].data(), per, stacked.data() + b * per);
    const ImageTensor out = generator_forward(generator, stacked, nn::ForwardMode::Eval);
    for (int b = 0; b < count; ++b)
      std::copy_n(out.data() + b * per, per, patches[start + b].data());
  }

  return denormalize(assemble_patches(patches, grid));
}

}  // namespace deblur
