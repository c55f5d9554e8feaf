#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deblur/nn/tensor.hpp"

namespace deblur {

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// Versioned binary container of named float tensors plus string metadata.
// The file embeds its payload length and a CRC32, so truncation and
// corruption are detected before any state is handed out.
class TensorFile {
 public:
  std::map<std::string, std::string> meta;

  void add(const std::string& name, const nn::TensorF& t);
  const nn::TensorF* find(const std::string& name) const;
  const nn::TensorF& require(const std::string& name) const;
  const std::vector<std::pair<std::string, nn::TensorF>>& tensors() const {
    return tensors_;
  }

  void save(const std::string& path) const;
  static TensorFile load(const std::string& path);

 private:
  std::vector<std::pair<std::string, nn::TensorF>> tensors_;
};

}  // namespace deblur
