#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "astn/image.hpp"

namespace astn {

/// Seedable generator used everywhere randomness enters: mt19937_64 with the
/// standard library's normal/Poisson transforms. Same seed, same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer on the closed interval [lo, hi].
  long long uniform_int(long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(engine_);
  }
  long long poisson(double mean) { return std::poisson_distribution<long long>(mean)(engine_); }

  ImageBuffer normal_image(std::size_t width, std::size_t height);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Derives an independent stream seed from a master seed and a list of
/// indices (cell, image, ...) with splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

}  // namespace astn
