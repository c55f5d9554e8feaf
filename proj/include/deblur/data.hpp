#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deblur/image.hpp"

namespace deblur {

struct PairedSample {
  PixelImage blur;
  PixelImage sharp;
  std::string id;
};

struct ManifestEntry {
  std::string id;
  std::string blur_path;
  std::string sharp_path;
};

struct DatasetManifest {
  std::string root;
  std::string split;
  std::vector<ManifestEntry> entries;

  // one "id<TAB>blur<TAB>sharp" line per entry
  std::string to_index_text() const;
};

// Pairs every file in <root>/<split>/<sequence>/blur/ with the identically
// named file in .../sharp/. Deterministic lexicographic order. Orphans and
// empty trees are errors.
DatasetManifest scan_manifest(const std::string& root, const std::string& split);

PairedSample load_pair(const ManifestEntry& entry);

struct MotionBlurKernel {
  int length = 1;      // pixels along the motion direction
  double angle = 0.0;  // degrees in [0, 180)
  int rows = 1, cols = 1;
  std::vector<double> taps;  // row-major, sums to 1

  double at(int r, int c) const { return taps[static_cast<size_t>(r) * cols + c]; }
};

// Line-segment kernel rasterized at the given angle (degrees, 0 = horizontal),
// normalized to unit mass.
MotionBlurKernel make_kernel(int length, double angle);

// Per-channel 2-D convolution with reflect boundary handling, rounded back
// to 8 bits (half-up).
PixelImage apply_blur(const PixelImage& img, const MotionBlurKernel& k);

// Writes n sharp/blur pairs of seeded geometric renders in the scan_manifest
// layout and returns the resulting manifest. Same seed, same bytes.
DatasetManifest make_synthetic_dataset(int n, int size, uint64_t seed,
                                       const std::string& out_root,
                                       const std::string& split = "train");

}  // namespace deblur
