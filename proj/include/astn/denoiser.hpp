#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "astn/image.hpp"
#include "astn/rng.hpp"
#include "astn/schedule.hpp"

namespace astn {

/// A (possibly fractional) diffusion time together with its alpha_bar.
/// Solvers that evaluate between grid points (midpoint methods) pass
/// fractional t; alpha_bar is always consistent with the schedule.
struct NoiseLevel {
  double t = 0.0;
  double alpha_bar = 1.0;

  static NoiseLevel at(const NoiseSchedule& sched, int t) {
    return {static_cast<double>(t), sched.alpha_bar(t)};
  }
  static NoiseLevel at(const NoiseSchedule& sched, double t) { return {t, sched.alpha_bar_at(t)}; }
};

/// Conditioned noise estimator eps(x_t, t, c).
class EpsilonPredictor {
 public:
  virtual ~EpsilonPredictor() = default;

  /// Whether predict() needs a condition image.
  virtual bool requires_condition() const { return false; }
  virtual std::string name() const = 0;

  /// Validates inputs (t >= 1, condition presence and shape) and the output
  /// (shape, finiteness) around the implementation's estimate.
  ImageBuffer predict(const ImageBuffer& x_t, NoiseLevel level, const ImageBuffer* cond) const;
  ImageBuffer predict(const ImageBuffer& x_t, int t, const ImageBuffer* cond,
                      const NoiseSchedule& sched) const {
    return predict(x_t, NoiseLevel::at(sched, t), cond);
  }

 protected:
  virtual ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel level,
                               const ImageBuffer* cond) const = 0;
};

/// x_0 ~ N(mean, var * I) toy data.
struct GaussianDataModel {
  ImageBuffer mean;
  double var = 0.0;
};

/// Bayes-optimal E[eps | x_t] under GaussianDataModel:
/// sqrt(1-abar) * (x_t - sqrt(abar) m) / (abar s^2 + 1 - abar).
ImageBuffer analytic_gaussian_epsilon(const GaussianDataModel& model, const ImageBuffer& x_t,
                                      double alpha_bar);
ImageBuffer analytic_gaussian_epsilon(const GaussianDataModel& model, const ImageBuffer& x_t, int t,
                                      const NoiseSchedule& sched);

class ZeroPredictor final : public EpsilonPredictor {
 public:
  std::string name() const override { return "zero"; }

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel, const ImageBuffer*) const override {
    return ImageBuffer(x_t.width(), x_t.height());
  }
};

/// Returns the same noise image for every input.
class ConstantPredictor final : public EpsilonPredictor {
 public:
  explicit ConstantPredictor(ImageBuffer eps) : eps_(std::move(eps)) {}
  std::string name() const override { return "constant"; }

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel, const ImageBuffer*) const override;

 private:
  ImageBuffer eps_;
};

/// Unconditional analytic oracle. With var = 0 this is the exact-noise
/// predictor: it recovers the eps that produced x_t from x_0 = mean.
class GaussianOraclePredictor final : public EpsilonPredictor {
 public:
  explicit GaussianOraclePredictor(GaussianDataModel model);
  std::string name() const override { return "oracle"; }
  const GaussianDataModel& model() const noexcept { return model_; }

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel level,
                       const ImageBuffer* cond) const override;

 private:
  GaussianDataModel model_;
};

/// Oracle for the conditioned toy problem c = x_0 + eta, eta ~ N(0, noise_level^2).
/// Uses the Gaussian posterior of x_0 given c as the data model.
class ConditionedOraclePredictor final : public EpsilonPredictor {
 public:
  /// noise_level may be +infinity (condition carries no information).
  ConditionedOraclePredictor(GaussianDataModel prior, double noise_level);

  bool requires_condition() const override { return true; }
  std::string name() const override { return "conditioned-oracle"; }
  double noise_level() const noexcept { return noise_level_; }

  /// Posterior (mean, variance) of x_0 given the condition image.
  GaussianDataModel posterior(const ImageBuffer& cond) const;

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel level,
                       const ImageBuffer* cond) const override;

 private:
  GaussianDataModel prior_;
  double noise_level_;
};

ConditionedOraclePredictor conditioned_oracle(GaussianDataModel prior, double noise_level);

/// Per-timestep affine model eps = a_t * x_t + b_t + g_t * c, t = 1..T.
/// Fractional t interpolates linearly between neighbouring tables.
class AffinePredictor final : public EpsilonPredictor {
 public:
  /// Initialized at a_t = 1, b_t = 0, g_t = 0.
  AffinePredictor(int steps, std::size_t width, std::size_t height, bool conditional);

  bool requires_condition() const override { return conditional_; }
  std::string name() const override { return conditional_ ? "affine-concat" : "affine"; }

  int steps() const noexcept { return static_cast<int>(a_.size()); }
  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool conditional() const noexcept { return conditional_; }

  // 1-based timestep accessors.
  double& a(int t) { return a_.at(static_cast<std::size_t>(t - 1)); }
  double a(int t) const { return a_.at(static_cast<std::size_t>(t - 1)); }
  double& g(int t) { return g_.at(static_cast<std::size_t>(t - 1)); }
  double g(int t) const { return g_.at(static_cast<std::size_t>(t - 1)); }
  ImageBuffer& b(int t) { return b_.at(static_cast<std::size_t>(t - 1)); }
  const ImageBuffer& b(int t) const { return b_.at(static_cast<std::size_t>(t - 1)); }

  /// Text format: header "ASTAFFINE1 T width height conditional", then one
  /// line per t: "t a_t g_t checksum b_0 ... b_{n-1}" with hexfloat values and
  /// checksum = FNV-1a 64 over the b_t doubles. Bit-exact round trip.
  void save(const std::filesystem::path& path) const;
  static AffinePredictor load(const std::filesystem::path& path);

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel level,
                       const ImageBuffer* cond) const override;

 private:
  std::size_t width_;
  std::size_t height_;
  bool conditional_;
  std::vector<double> a_;
  std::vector<double> g_;
  std::vector<ImageBuffer> b_;
};

/// FNV-1a 64 over the bit patterns of an image's values.
std::uint64_t image_checksum(const ImageBuffer& img);

enum class ConditionMode { None, Concat };

struct SgdConfig {
  double lr = 0.05;
  long long iterations = 2000;
  int batch = 64;
  /// Iterations per reported epoch (0 means iterations / 10).
  long long epoch_iterations = 0;
  /// Fraction of iterations at the end over which lr decays linearly to 0.
  double decay_fraction = 0.5;
};

/// Training data: either a Gaussian model to draw x_0 from, or a fixed
/// sample set drawn with replacement. For ConditionMode::Concat the
/// condition is c = x_0 + N(0, cond_noise^2).
struct TrainingData {
  std::vector<ImageBuffer> samples;
  GaussianDataModel model;
  bool from_model = true;
  double cond_noise = 0.0;

  static TrainingData gaussian(GaussianDataModel m, double cond_noise = 0.0) {
    TrainingData d;
    d.model = std::move(m);
    d.cond_noise = cond_noise;
    return d;
  }
  static TrainingData sample_set(std::vector<ImageBuffer> xs, double cond_noise = 0.0) {
    TrainingData d;
    d.samples = std::move(xs);
    d.from_model = false;
    d.cond_noise = cond_noise;
    return d;
  }
};

struct TrainingResult {
  AffinePredictor predictor;
  std::vector<double> epoch_losses;
};

/// Minibatch SGD on the eps-prediction objective over the affine family.
/// Gradients are analytic. The offset b_t is updated with the per-pixel
/// gradient (the image-mean loss scaled by pixel count) so every parameter
/// group moves at a comparable rate. Throws NumericalError if an epoch's loss
/// exceeds 10x the initial loss.
TrainingResult train_affine_predictor(const TrainingData& data, ConditionMode mode,
                                      const NoiseSchedule& sched, const SgdConfig& sgd, Rng& rng);

/// Forwards to another predictor and counts evaluations.
class CountingPredictor final : public EpsilonPredictor {
 public:
  explicit CountingPredictor(const EpsilonPredictor& inner) : inner_(inner) {}

  bool requires_condition() const override { return inner_.requires_condition(); }
  std::string name() const override { return inner_.name(); }
  long long count() const noexcept { return count_.load(); }
  void reset() noexcept { count_ = 0; }

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel level,
                       const ImageBuffer* cond) const override {
    ++count_;
    return inner_.predict(x_t, level, cond);
  }

 private:
  const EpsilonPredictor& inner_;
  mutable std::atomic<long long> count_{0};
};

}  // namespace astn
