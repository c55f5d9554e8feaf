#pragma once

#include <cstdint>
#include <vector>

#include "deblur/architecture.hpp"
#include "deblur/image.hpp"
#include "deblur/nn/network.hpp"

namespace deblur {

nn::NetworkF build_generator(uint64_t seed, double init_std = 0.02);
nn::NetworkF build_discriminator(uint64_t seed, double init_std = 0.02);

// Deblurring pass: head = tanh(final conv), output = clamp(input + head, [-1, 1]).
// Input must be 3-channel with height and width multiples of 4 (and >= 8).
ImageTensor generator_forward(nn::NetworkF& net, const ImageTensor& blur,
                              nn::ForwardMode mode = nn::ForwardMode::Eval,
                              nn::NetCache<float>* cache = nullptr);

// Patch scores: sigmoid map reduced by spatial mean, one value in [0,1] per
// batch element. Input must be 3-channel with height and width multiples of 16.
// The pre-reduction map is written to *patch_map when given.
std::vector<double> discriminator_forward(nn::NetworkF& net, const ImageTensor& img,
                                          nn::ForwardMode mode = nn::ForwardMode::Eval,
                                          nn::NetCache<float>* cache = nullptr,
                                          ImageTensor* patch_map = nullptr);

}  // namespace deblur
