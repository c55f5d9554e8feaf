#include <doctest.h>

#include <set>

#include "deblur/image.hpp"
#include "deblur/image_io.hpp"
#include "deblur/nn/rng.hpp"
#include "test_util.hpp"

using namespace deblur;

namespace {

PixelImage random_image(int h, int w, int c, nn::Rng& rng) {
  PixelImage img(h, w, c);
  for (auto& v : img.data) v = static_cast<uint8_t>(rng.next_below(256));
  return img;
}

}  // namespace

TEST_CASE("normalize maps 8-bit endpoints and midpoints") {
  PixelImage img(1, 3, 1);
  img.data = {0, 255, 128};
  const ImageTensor t = normalize(img);
  CHECK(t.n == 1);
  CHECK(t.at(0, 0, 0, 0) == doctest::Approx(-1.0));
  CHECK(t.at(0, 0, 1, 0) == doctest::Approx(1.0));
  CHECK(t.at(0, 0, 2, 0) == doctest::Approx(128.0 / 127.5 - 1.0).epsilon(1e-6));
}

TEST_CASE("denormalize endpoints and the documented half-up midpoint") {
  ImageTensor t(1, 1, 3, 1);
  t.v = {-1.0f, 1.0f, 0.0f};
  const PixelImage img = denormalize(t);
  CHECK(img.data[0] == 0);
  CHECK(img.data[1] == 255);
  CHECK(img.data[2] == 128);  // round(127.5) half-up
}

TEST_CASE("denormalize clamps out-of-range values") {
  ImageTensor t(1, 1, 2, 1);
  t.v = {-1.5f, 2.0f};
  const PixelImage img = denormalize(t);
  CHECK(img.data[0] == 0);
  CHECK(img.data[1] == 255);
}

TEST_CASE("normalize/denormalize round trip is exact for every 8-bit value") {
  PixelImage img(16, 16, 1);
  for (int i = 0; i < 256; ++i) img.data[i] = static_cast<uint8_t>(i);
  const PixelImage back = denormalize(normalize(img));
  for (int i = 0; i < 256; ++i) CHECK(back.data[i] == i);
}

TEST_CASE("plan_patches tiles 720p with snapped border offsets") {
  const PatchGrid g = plan_patches(720, 1280, 256, 256);
  CHECK(g.positions.size() == 15);
  std::set<int> rows, cols;
  for (auto [r, c] : g.positions) {
    rows.insert(r);
    cols.insert(c);
  }
  CHECK(rows == std::set<int>{0, 256, 464});
  CHECK(cols == std::set<int>{0, 256, 512, 768, 1024});
}

TEST_CASE("plan_patches degenerate and snapped cases") {
  CHECK(plan_patches(256, 256, 256, 256).positions.size() == 1);
  const PatchGrid g = plan_patches(300, 300, 256, 256);
  CHECK(g.positions.size() == 4);
  std::set<int> offs;
  for (auto [r, c] : g.positions) {
    offs.insert(r);
    offs.insert(c);
  }
  CHECK(offs == std::set<int>{0, 44});
}

TEST_CASE("plan_patches rejects images smaller than the patch") {
  CHECK_THROWS_WITH_AS(plan_patches(100, 100, 256, 128),
                       doctest::Contains("pad or resize"), std::invalid_argument);
  CHECK_THROWS_AS(plan_patches(256, 256, 256, 0), std::invalid_argument);
  CHECK_THROWS_AS(plan_patches(256, 256, 256, 300), std::invalid_argument);
}

TEST_CASE("plan_patches covers every pixel for random shapes") {
  nn::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 16 + static_cast<int>(rng.next_below(200));
    const int w = 16 + static_cast<int>(rng.next_below(200));
    const int patch = 8 + static_cast<int>(rng.next_below(std::min(h, w) - 8 + 1));
    const int stride = 1 + static_cast<int>(rng.next_below(patch));
    const PatchGrid g = plan_patches(h, w, patch, stride);
    std::vector<int> covered(static_cast<size_t>(h) * w, 0);
    for (auto [r, c] : g.positions) {
      REQUIRE(r >= 0);
      REQUIRE(c >= 0);
      REQUIRE(r + patch <= h);
      REQUIRE(c + patch <= w);
      for (int y = r; y < r + patch; ++y)
        for (int x = c; x < c + patch; ++x) covered[static_cast<size_t>(y) * w + x] = 1;
    }
    const bool all = std::all_of(covered.begin(), covered.end(), [](int v) { return v == 1; });
    CHECK(all);
  }
}

TEST_CASE("assemble_patches returns a single patch unchanged") {
  nn::Rng rng(3);
  ImageTensor patch(1, 16, 16, 3);
  for (auto& v : patch.v) v = static_cast<float>(rng.uniform(-1, 1));
  PatchGrid g = plan_patches(16, 16, 16, 16);
  const ImageTensor out = assemble_patches({patch}, g);
  CHECK(out.v == patch.v);
}

TEST_CASE("assemble_patches averages a half-overlap of two constant patches") {
  PatchGrid g;
  g.patch_size = 4;
  g.source_height = 4;
  g.source_width = 6;
  g.positions = {{0, 0}, {0, 2}};
  ImageTensor a(1, 4, 4, 1), b(1, 4, 4, 1);
  a.fill(0.25f);
  b.fill(0.75f);
  const ImageTensor out = assemble_patches({a, b}, g);
  CHECK(out.at(0, 0, 0, 0) == 0.25f);       // only a
  CHECK(out.at(0, 0, 3, 0) == 0.5f);        // overlap: (a + b) / 2
  CHECK(out.at(0, 0, 5, 0) == 0.75f);       // only b
}

TEST_CASE("extract then assemble with stride == patch is the identity") {
  nn::Rng rng(17);
  for (auto [h, w, p] : {std::tuple{32, 48, 16}, {30, 30, 10}, {25, 40, 8}}) {
    ImageTensor img(1, h, w, 3);
    for (auto& v : img.v) v = static_cast<float>(rng.uniform(-1, 1));
    const PatchGrid g = plan_patches(h, w, p, p);
    const ImageTensor out = assemble_patches(extract_patches(img, g), g);
    CHECK(out.v == img.v);
  }
}

TEST_CASE("assemble_patches rejects patch count mismatch") {
  PatchGrid g = plan_patches(16, 16, 8, 8);
  ImageTensor a(1, 8, 8, 1);
  CHECK_THROWS_AS(assemble_patches({a}, g), std::invalid_argument);
}

TEST_CASE("png round trip preserves bytes") {
  testutil::TempDir tmp("png");
  nn::Rng rng(5);
  const PixelImage img = random_image(21, 33, 3, rng);
  const std::string path = (tmp.path() / "img.png").string();
  write_png(path, img);
  const PixelImage back = read_png(path);
  CHECK(back.same_shape(img));
  CHECK(back.data == img.data);
}

TEST_CASE("grayscale png round trip") {
  testutil::TempDir tmp("png_gray");
  nn::Rng rng(6);
  const PixelImage img = random_image(15, 9, 1, rng);
  const std::string path = (tmp.path() / "g.png").string();
  write_png(path, img);
  const PixelImage back = read_png(path);
  CHECK(back.channels == 1);
  CHECK(back.data == img.data);
}

TEST_CASE("jpeg round trip keeps shape; content is lossy-close") {
  testutil::TempDir tmp("jpeg");
  PixelImage img(32, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<uint8_t>(80 + 40 * c);
  const std::string path = (tmp.path() / "img.jpg").string();
  write_jpeg(path, img);
  const PixelImage back = read_jpeg(path);
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.data.size(); i += 97)
    CHECK(std::abs(int(back.data[i]) - int(img.data[i])) <= 8);
}

TEST_CASE("read_image rejects unknown extensions") {
  CHECK_THROWS_AS(read_image("/nonexistent/file.bmp"), std::runtime_error);
  CHECK_THROWS_AS(read_image("/nonexistent/file.png"), std::runtime_error);
}
