#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "deblur/data.hpp"
#include "deblur/image_io.hpp"
#include "deblur/metrics.hpp"
#include "deblur/nn/rng.hpp"
#include "test_util.hpp"

using namespace deblur;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("length-1 kernel is a single unit tap") {
  for (double angle : {0.0, 37.0, 90.0, 145.0}) {
    const MotionBlurKernel k = make_kernel(1, angle);
    CHECK(k.rows == 1);
    CHECK(k.cols == 1);
    CHECK(k.taps[0] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(make_kernel(0, 0.0), std::invalid_argument);
}

TEST_CASE("length-3 horizontal kernel is a uniform row") {
  const MotionBlurKernel k = make_kernel(3, 0.0);
  REQUIRE(k.rows == 1);
  REQUIRE(k.cols == 3);
  for (int c = 0; c < 3; ++c) CHECK(k.at(0, c) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("vertical kernel transposes the horizontal one") {
  const MotionBlurKernel k = make_kernel(5, 90.0);
  CHECK(k.cols == 1);
  CHECK(k.rows == 5);
}

TEST_CASE("kernels are normalized and nonnegative at any angle") {
  nn::Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const int length = 1 + static_cast<int>(rng.next_below(15));
    const double angle = rng.uniform(0.0, 180.0);
    const MotionBlurKernel k = make_kernel(length, angle);
    double sum = 0.0;
    for (double t : k.taps) {
      REQUIRE(t >= 0.0);
      sum += t;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("identity kernel leaves the image unchanged") {
  nn::Rng rng(42);
  PixelImage img(40, 40, 3);
  for (auto& v : img.data) v = static_cast<uint8_t>(rng.next_below(256));
  const PixelImage out = apply_blur(img, make_kernel(1, 0.0));
  CHECK(out.data == img.data);
}

TEST_CASE("white pixel smears into three 85s under a length-3 horizontal kernel") {
  PixelImage img(33, 33, 1);
  img.at(16, 16, 0) = 255;
  const PixelImage out = apply_blur(img, make_kernel(3, 0.0));
  CHECK(out.at(16, 15, 0) == 85);
  CHECK(out.at(16, 16, 0) == 85);
  CHECK(out.at(16, 17, 0) == 85);
  CHECK(out.at(16, 18, 0) == 0);
  CHECK(out.at(15, 16, 0) == 0);
}

TEST_CASE("constant image is invariant under any unit-mass kernel") {
  const PixelImage img = [] {
    PixelImage i(36, 36, 3);
    std::fill(i.data.begin(), i.data.end(), uint8_t{137});
    return i;
  }();
  for (auto [len, angle] : {std::pair{5, 30.0}, {9, 120.0}, {15, 77.5}}) {
    const PixelImage out = apply_blur(img, make_kernel(len, angle));
    CHECK(out.data == img.data);
  }
}

TEST_CASE("blur preserves interior mean intensity within one level") {
  nn::Rng rng(43);
  PixelImage img(64, 64, 1);
  for (auto& v : img.data) v = static_cast<uint8_t>(rng.next_below(256));
  const PixelImage out = apply_blur(img, make_kernel(7, 45.0));
  double before = 0, after = 0;
  int count = 0;
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 56; ++x) {
      before += img.at(y, x, 0);
      after += out.at(y, x, 0);
      ++count;
    }
  CHECK(std::abs(before / count - after / count) <= 1.0);
}

TEST_CASE("kernel larger than the image is rejected") {
  PixelImage img(8, 8, 1);
  CHECK_THROWS_AS(apply_blur(img, make_kernel(15, 0.0)), std::invalid_argument);
}

TEST_CASE("synthetic dataset is deterministic down to the bytes") {
  testutil::TempDir tmp_a("synth_a"), tmp_b("synth_b");
  const DatasetManifest ma = make_synthetic_dataset(4, 48, 7, tmp_a.str());
  const DatasetManifest mb = make_synthetic_dataset(4, 48, 7, tmp_b.str());
  REQUIRE(ma.entries.size() == 4);
  REQUIRE(mb.entries.size() == 4);
  for (size_t i = 0; i < ma.entries.size(); ++i) {
    CHECK(ma.entries[i].id == mb.entries[i].id);
    CHECK(slurp(ma.entries[i].blur_path) == slurp(mb.entries[i].blur_path));
    CHECK(slurp(ma.entries[i].sharp_path) == slurp(mb.entries[i].sharp_path));
  }

  // a different seed changes the content
  testutil::TempDir tmp_c("synth_c");
  const DatasetManifest mc = make_synthetic_dataset(4, 48, 8, tmp_c.str());
  CHECK(slurp(ma.entries[0].sharp_path) != slurp(mc.entries[0].sharp_path));
}

TEST_CASE("synthetic pairs are genuinely blurred") {
  testutil::TempDir tmp("synth_blur");
  const DatasetManifest m = make_synthetic_dataset(6, 48, 11, tmp.str());
  for (const auto& e : m.entries) {
    const PairedSample s = load_pair(e);
    CHECK(s.blur.data != s.sharp.data);
    const double p = psnr(s.blur, s.sharp);
    CHECK(std::isfinite(p));
    CHECK(p > 5.0);
  }
  CHECK_THROWS_AS(make_synthetic_dataset(1, 16, 7, tmp.str()), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic_dataset(0, 48, 7, tmp.str()), std::invalid_argument);
}

TEST_CASE("longer streaks never raise PSNR against the sharp image") {
  testutil::TempDir tmp("synth_mono");
  const DatasetManifest m = make_synthetic_dataset(1, 64, 19, tmp.str());
  const PairedSample s = load_pair(m.entries[0]);
  double prev = std::numeric_limits<double>::infinity();
  for (int len : {3, 7, 11, 15}) {
    const PixelImage blurred = apply_blur(s.sharp, make_kernel(len, 60.0));
    const double p = psnr(blurred, s.sharp);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("scan_manifest pairs files and reports counts") {
  testutil::TempDir tmp("scan");
  make_synthetic_dataset(5, 48, 3, tmp.str(), "train");
  make_synthetic_dataset(2, 48, 4, tmp.str(), "test");
  const DatasetManifest train = scan_manifest(tmp.str(), "train");
  CHECK(train.entries.size() == 5);
  const DatasetManifest test = scan_manifest(tmp.str(), "test");
  CHECK(test.entries.size() == 2);

  // bijection: every manifest id is unique, every file paired exactly once
  std::set<std::string> ids;
  for (const auto& e : train.entries) ids.insert(e.id);
  CHECK(ids.size() == train.entries.size());

  const std::string index = train.to_index_text();
  CHECK(std::count(index.begin(), index.end(), '\n') == 5);
  CHECK(index.find('\t') != std::string::npos);
}

TEST_CASE("scan_manifest rejects empty trees and orphans") {
  testutil::TempDir tmp("scan_bad");
  CHECK_THROWS_AS(scan_manifest(tmp.str(), "train"), std::runtime_error);

  fs::create_directories(tmp.path() / "train" / "seq000" / "blur");
  fs::create_directories(tmp.path() / "train" / "seq000" / "sharp");
  CHECK_THROWS_AS(scan_manifest(tmp.str(), "train"), std::runtime_error);

  PixelImage img(16, 16, 3);
  write_png((tmp.path() / "train" / "seq000" / "blur" / "orphan.png").string(), img);
  CHECK_THROWS_WITH_AS(scan_manifest(tmp.str(), "train"), doctest::Contains("orphan"),
                       std::runtime_error);
}

TEST_CASE("load_pair rejects mismatched dimensions") {
  testutil::TempDir tmp("pair_bad");
  fs::create_directories(tmp.path() / "train" / "s" / "blur");
  fs::create_directories(tmp.path() / "train" / "s" / "sharp");
  write_png((tmp.path() / "train" / "s" / "blur" / "a.png").string(), PixelImage(16, 16, 3));
  write_png((tmp.path() / "train" / "s" / "sharp" / "a.png").string(), PixelImage(16, 20, 3));
  const DatasetManifest m = scan_manifest(tmp.str(), "train");
  CHECK_THROWS_AS(load_pair(m.entries[0]), std::runtime_error);
}
