#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "astn/image.hpp"

namespace astn::test {

inline ImageBuffer scalar(double v) { return ImageBuffer(1, 1, v); }

/// Smooth deterministic test pattern in [0.1, 0.9].
inline ImageBuffer pattern(std::size_t w, std::size_t h, double phase = 0.0) {
  ImageBuffer img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      img.at(x, y) = 0.5 + 0.4 * std::sin(0.3 * static_cast<double>(x) + 0.2 * static_cast<double>(y) + phase);
    }
  }
  return img;
}

inline double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("astn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace astn::test
