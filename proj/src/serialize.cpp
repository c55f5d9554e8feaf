#include "deblur/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace deblur {

namespace {

constexpr char kMagic[8] = {'D', 'B', 'L', 'R', 'T', 'N', 'S', '1'};

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  Reader(const char* d, size_t n) : d_(d), n_(n) {}
  uint32_t u32() { return read<uint32_t>(); }
  uint64_t u64() { return read<uint64_t>(); }
  int32_t i32() { return read<int32_t>(); }
  uint8_t u8() { return read<uint8_t>(); }
  std::string str() {
    const uint32_t len = u32();
    need(len);
    std::string s(d_ + pos_, len);
    pos_ += len;
    return s;
  }
  void raw(void* dst, size_t len) {
    need(len);
    std::memcpy(dst, d_ + pos_, len);
    pos_ += len;
  }

 private:
  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, d_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(size_t len) {
    if (pos_ + len > n_) throw std::runtime_error("tensor file: payload truncated");
  }
  const char* d_;
  size_t n_;
  size_t pos_ = 0;
};

}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
  static const auto table = [] {
    std::vector<uint32_t> t(256);
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void TensorFile::add(const std::string& name, const nn::TensorF& t) {
  tensors_.emplace_back(name, t);
}

const nn::TensorF* TensorFile::find(const std::string& name) const {
  for (const auto& [n, t] : tensors_)
    if (n == name) return &t;
  return nullptr;
}

const nn::TensorF& TensorFile::require(const std::string& name) const {
  const nn::TensorF* t = find(name);
  if (!t) throw std::runtime_error("tensor file: missing tensor '" + name + "'");
  return *t;
}

void TensorFile::save(const std::string& path) const {
  std::string payload;
  put_u32(payload, static_cast<uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(payload, k);
    put_str(payload, v);
  }
  put_u32(payload, static_cast<uint32_t>(tensors_.size()));
  for (const auto& [name, t] : tensors_) {
    put_str(payload, name);
    payload.push_back(char(0));  // dtype f32
    put_u32(payload, static_cast<uint32_t>(t.n));
    put_u32(payload, static_cast<uint32_t>(t.h));
    put_u32(payload, static_cast<uint32_t>(t.w));
    put_u32(payload, static_cast<uint32_t>(t.c));
    put_u64(payload, t.size());
    payload.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(kMagic, sizeof(kMagic));
  const uint64_t len = payload.size();
  f.write(reinterpret_cast<const char*>(&len), 8);
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  const uint32_t crc = crc32(payload.data(), payload.size());
  f.write(reinterpret_cast<const char*>(&crc), 4);
  if (!f) throw std::runtime_error("write failed: " + path);
}

TensorFile TensorFile::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": not a tensor container");
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  if (f.gcount() != 8) throw std::runtime_error(path + ": truncated header");
  std::string payload(len, '\0');
  f.read(payload.data(), static_cast<std::streamsize>(len));
  if (static_cast<uint64_t>(f.gcount()) != len)
    throw std::runtime_error(path + ": truncated payload");
  uint32_t stored_crc = 0;
  f.read(reinterpret_cast<char*>(&stored_crc), 4);
  if (f.gcount() != 4) throw std::runtime_error(path + ": missing checksum");
  if (crc32(payload.data(), payload.size()) != stored_crc)
    throw std::runtime_error(path + ": checksum mismatch, file is corrupt");

  TensorFile tf;
  Reader r(payload.data(), payload.size());
  const uint32_t n_meta = r.u32();
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    tf.meta[k] = r.str();
  }
  const uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const uint8_t dtype = r.u8();
    if (dtype != 0) throw std::runtime_error(path + ": unsupported dtype");
    const int n = r.i32(), h = r.i32(), w = r.i32(), c = r.i32();
    const uint64_t count = r.u64();
    nn::TensorF t(n, h, w, c);
    if (t.size() != count) throw std::runtime_error(path + ": tensor size mismatch");
    r.raw(t.data(), count * sizeof(float));
    tf.tensors_.emplace_back(std::move(name), std::move(t));
  }
  return tf;
}

}  // namespace deblur
