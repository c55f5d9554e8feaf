#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "deblur/nn/rng.hpp"
#include "deblur/serialize.hpp"
#include "test_util.hpp"

using namespace deblur;
namespace fs = std::filesystem;

TEST_CASE("tensor container round trip preserves metadata and bits") {
  testutil::TempDir tmp("tns");
  TensorFile tf;
  tf.meta["note"] = "hello";
  nn::Rng rng(1);
  nn::TensorF t(2, 3, 4, 5);
  for (auto& v : t.v) v = static_cast<float>(rng.normal());
  tf.add("block/weight", t);
  nn::TensorF s(1, 1, 1, 7);
  s.fill(0.25f);
  tf.add("block/bias", s);

  const std::string path = (tmp.path() / "x.tns").string();
  tf.save(path);
  const TensorFile back = TensorFile::load(path);
  CHECK(back.meta.at("note") == "hello");
  REQUIRE(back.tensors().size() == 2);
  CHECK(back.require("block/weight").v == t.v);
  CHECK(back.require("block/bias").v == s.v);
  CHECK(back.find("missing") == nullptr);
  CHECK_THROWS_AS(back.require("missing"), std::runtime_error);
}

TEST_CASE("corruption and truncation are rejected") {
  testutil::TempDir tmp("tns_bad");
  TensorFile tf;
  nn::TensorF t(1, 4, 4, 1);
  t.fill(1.0f);
  tf.add("t", t);
  const std::string path = (tmp.path() / "x.tns").string();
  tf.save(path);

  // flip one payload byte
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    char c;
    f.seekg(40);
    f.get(c);
    f.seekp(40);
    f.put(static_cast<char>(c ^ 0x5A));
  }
  CHECK_THROWS_WITH_AS(TensorFile::load(path), doctest::Contains("checksum"),
                       std::runtime_error);

  // rewrite, then truncate
  tf.save(path);
  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 7);
  CHECK_THROWS_AS(TensorFile::load(path), std::runtime_error);

  // not a container at all
  std::ofstream(path, std::ios::binary) << "short";
  CHECK_THROWS_AS(TensorFile::load(path), std::runtime_error);
}

TEST_CASE("crc32 matches the standard test vector") {
  const char* s = "123456789";
  CHECK(crc32(s, 9) == 0xCBF43926u);
}
