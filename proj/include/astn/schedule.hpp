#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace astn {

/// Discrete variance schedule for T diffusion steps.
///
/// Indexing: betas/alphas are 0-based over t = 1..T (betas()[t-1] is beta_t);
/// alpha_bars are indexed directly by t with a sentinel alpha_bar(0) = 1, so
/// t = 0 means "clean data" everywhere in the library.
class NoiseSchedule {
 public:
  /// Builds from explicit betas; each must lie in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  std::span<const double> betas() const noexcept { return betas_; }
  std::span<const double> alphas() const noexcept { return alphas_; }
  std::span<const double> alpha_bars() const noexcept { return alpha_bars_; }

  /// Cumulative product up to t, t in [0, T].
  double alpha_bar(int t) const;

  /// Half log-SNR: 0.5 * log(abar / (1 - abar)). Requires t >= 1.
  double log_snr(int t) const;

  /// alpha_bar at a fractional timestep, interpolating log(alpha_bar)
  /// piecewise-linearly between integer steps. t in [0, T].
  double alpha_bar_at(double t) const;

  /// Inverse of the half log-SNR on the interpolated schedule; returns the
  /// fractional timestep in [1, T] whose log-SNR equals `lambda`.
  double timestep_for_log_snr(double lambda) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> log_alpha_bars_;
};

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end);

/// Defaults used by the experiments: linear 1e-4 -> 0.02 over 1000 steps.
inline constexpr int kDefaultSteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

/// Half log-SNR for a raw alpha_bar in (0, 1).
double log_snr_from_alpha_bar(double alpha_bar);
double alpha_bar_from_log_snr(double lambda);

enum class GridSpacing { Uniform };

/// Strictly decreasing reverse-process timesteps. steps.front() is the
/// origin; the sampler appends an implicit final hop to t = 0.
struct TimestepGrid {
  std::vector<int> steps;
  int origin = 0;

  std::size_t size() const noexcept { return steps.size(); }
};

/// `count` timesteps spread evenly from `origin` down to 1 (both ends
/// included). origin == count yields the dense grid origin, origin-1, ..., 1.
TimestepGrid make_timestep_grid(int origin, int count, int total_steps,
                                GridSpacing spacing = GridSpacing::Uniform);

}  // namespace astn
