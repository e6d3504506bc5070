#include "astn/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "astn/error.hpp"

namespace astn {

ImageBuffer::ImageBuffer(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), data_(width * height, fill) {
  if (width == 0 || height == 0) throw DomainError("ImageBuffer: dimensions must be positive");
  if (!std::isfinite(fill)) throw NumericalError("ImageBuffer: non-finite fill value");
}

ImageBuffer::ImageBuffer(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width == 0 || height == 0) throw DomainError("ImageBuffer: dimensions must be positive");
  if (data_.size() != width * height) {
    throw DomainError("ImageBuffer: data length " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  require_finite(*this, "ImageBuffer construction");
}

bool ImageBuffer::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double ImageBuffer::mean() const noexcept {
  if (data_.empty()) return 0.0;
  return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

double ImageBuffer::min() const noexcept {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double ImageBuffer::max() const noexcept {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw DomainError(std::string(op) + ": shape mismatch " + std::to_string(a.width()) + "x" +
                      std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                      std::to_string(b.height()));
  }
}

void require_finite(const ImageBuffer& img, std::string_view where) {
  if (!img.all_finite()) throw NumericalError(std::string(where) + ": non-finite value");
}

ImageBuffer axpby(double a, const ImageBuffer& x, double b, const ImageBuffer& y) {
  require_same_shape(x, y, "axpby");
  ImageBuffer out(x.width(), x.height());
  auto o = out.values();
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xv[i] + b * yv[i];
  return out;
}

ImageBuffer scaled(const ImageBuffer& x, double a) {
  ImageBuffer out = x;
  for (double& v : out.values()) v *= a;
  return out;
}

double mean_squared_difference(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "mean_squared_difference");
  auto av = a.values();
  auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return acc / static_cast<double>(av.size());
}

double l2_norm(const ImageBuffer& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace astn
