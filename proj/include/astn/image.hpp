#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace astn {

/// Row-major 2D image. Values live in [0,1] for clean images; noised latents
/// are unbounded. Storage is double precision so that sampler identities hold
/// to ~1e-12; the on-disk format narrows to float32.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(std::size_t width, std::size_t height, double fill = 0.0);
  /// Throws DomainError on size mismatch and NumericalError on non-finite data.
  ImageBuffer(std::size_t width, std::size_t height, std::vector<double> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }
  double at(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const noexcept;

  double mean() const noexcept;
  double min() const noexcept;
  double max() const noexcept;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Throws DomainError naming `op` when shapes differ.
void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, std::string_view op);

/// Throws NumericalError naming `where` if any entry is NaN/Inf.
void require_finite(const ImageBuffer& img, std::string_view where);

/// a*x + b*y, elementwise.
ImageBuffer axpby(double a, const ImageBuffer& x, double b, const ImageBuffer& y);
ImageBuffer scaled(const ImageBuffer& x, double a);

/// Mean of squared differences; the building block for losses and metrics.
double mean_squared_difference(const ImageBuffer& a, const ImageBuffer& b);
double l2_norm(const ImageBuffer& x);

}  // namespace astn
