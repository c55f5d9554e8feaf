#include "deblur/model.hpp"

#include <stdexcept>
#include <string>

namespace deblur {

nn::NetworkF build_generator(uint64_t seed, double init_std) {
  return nn::NetworkF(generator_spec(), seed, init_std);
}

nn::NetworkF build_discriminator(uint64_t seed, double init_std) {
  return nn::NetworkF(discriminator_spec(), seed, init_std);
}

namespace {

void check_dim(const char* net, const char* which, int value, int divisor, int min) {
  if (value < min || value % divisor != 0)
    throw std::invalid_argument(std::string(net) + ": " + which + " = " +
                                std::to_string(value) + " must be >= " +
                                std::to_string(min) + " and divisible by " +
                                std::to_string(divisor));
}

}  // namespace

ImageTensor generator_forward(nn::NetworkF& net, const ImageTensor& blur,
                              nn::ForwardMode mode, nn::NetCache<float>* cache) {
  if (blur.c != net.spec().layers.front().c_in)
    throw std::invalid_argument("generator: channels = " + std::to_string(blur.c) +
                                ", expected " +
                                std::to_string(net.spec().layers.front().c_in));
  check_dim("generator", "height", blur.h, 4, 8);
  check_dim("generator", "width", blur.w, 4, 8);
  return net.forward(blur, mode, cache);
}

std::vector<double> discriminator_forward(nn::NetworkF& net, const ImageTensor& img,
                                          nn::ForwardMode mode,
                                          nn::NetCache<float>* cache,
                                          ImageTensor* patch_map) {
  if (img.c != net.spec().layers.front().c_in)
    throw std::invalid_argument("discriminator: channels = " + std::to_string(img.c) +
                                ", expected " +
                                std::to_string(net.spec().layers.front().c_in));
  check_dim("discriminator", "height", img.h, 16, 16);
  check_dim("discriminator", "width", img.w, 16, 16);
  ImageTensor map = net.forward(img, mode, cache);
  auto scores = nn::spatial_mean_scores(map);
  if (patch_map) *patch_map = std::move(map);
  return scores;
}

}  // namespace deblur
