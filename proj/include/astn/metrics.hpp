#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "astn/image.hpp"

namespace astn {

/// PSNR returned for identical images instead of +inf.
inline constexpr double kPsnrCapDb = 300.0;

double rmse(const ImageBuffer& ref, const ImageBuffer& test);
double psnr(const ImageBuffer& ref, const ImageBuffer& test, double data_range = 1.0);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Mean SSIM over all valid (fully inside the image) Gaussian windows.
double ssim(const ImageBuffer& ref, const ImageBuffer& test, const SsimParams& params = {});

/// Normalized 1D Gaussian taps for the SSIM window.
std::vector<double> gaussian_taps(int window, double sigma);

template <class T>
struct Timed {
  T value;
  double seconds;
};

/// Monotonic wall time around `op`. Returns Timed<R> for value-returning
/// callables and the bare seconds for void ones.
template <class F>
auto timed(F&& op) {
  using R = std::invoke_result_t<F>;
  const auto start = std::chrono::steady_clock::now();
  if constexpr (std::is_void_v<R>) {
    std::forward<F>(op)();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } else {
    R value = std::forward<F>(op)();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return Timed<R>{std::move(value), s};
  }
}

struct MetricsRow {
  std::string regime;
  std::string sampler;
  int steps = 0;
  double psnr_db = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  /// Mean wall time per image, seconds.
  double time_s = 0.0;
  std::uint64_t seed = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;

  static constexpr const char* kHeader = "regime,sampler,steps,psnr_db,rmse,ssim,time_s,seed";

  /// Writes a leading '#' comment noting the time unit, then the header and
  /// one line per row. Doubles are written with 17 significant digits.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;

  /// Skips '#' comment lines; throws ConfigError with the 1-based line number
  /// for malformed rows or a wrong header.
  static MetricsReport read_csv(std::istream& in);
  static MetricsReport read_csv(const std::filesystem::path& path);
};

}  // namespace astn
