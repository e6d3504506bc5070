#include "astn/schedule.hpp"

#include <cmath>
#include <string>

#include "astn/error.hpp"

namespace astn {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw DomainError("NoiseSchedule: need at least one step");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size() + 1);
  log_alpha_bars_.reserve(betas_.size() + 1);
  alpha_bars_.push_back(1.0);
  log_alpha_bars_.push_back(0.0);
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) {
      throw DomainError("NoiseSchedule: beta " + std::to_string(b) + " outside (0, 1)");
    }
    alphas_.push_back(1.0 - b);
    alpha_bars_.push_back(alpha_bars_.back() * (1.0 - b));
    log_alpha_bars_.push_back(log_alpha_bars_.back() + std::log1p(-b));
  }
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) {
    throw DomainError("alpha_bar: t=" + std::to_string(t) + " outside [0, " +
                      std::to_string(steps()) + "]");
  }
  return alpha_bars_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::log_snr(int t) const {
  if (t < 1) throw DomainError("log_snr: t must be >= 1 (lambda is infinite at t = 0)");
  return log_snr_from_alpha_bar(alpha_bar(t));
}

double NoiseSchedule::alpha_bar_at(double t) const {
  if (!(t >= 0.0 && t <= steps())) {
    throw DomainError("alpha_bar_at: t=" + std::to_string(t) + " outside schedule");
  }
  const auto lo = static_cast<std::size_t>(std::floor(t));
  if (lo >= static_cast<std::size_t>(steps())) return alpha_bars_.back();
  const double frac = t - static_cast<double>(lo);
  if (frac == 0.0) return alpha_bars_[lo];
  const double la = log_alpha_bars_[lo] + frac * (log_alpha_bars_[lo + 1] - log_alpha_bars_[lo]);
  return std::exp(la);
}

double NoiseSchedule::timestep_for_log_snr(double lambda) const {
  // lambda(t) is strictly decreasing on [1, T].
  double lo = 1.0;
  double hi = static_cast<double>(steps());
  const double lambda_lo = log_snr_from_alpha_bar(alpha_bar_at(lo));
  const double lambda_hi = log_snr_from_alpha_bar(alpha_bar_at(hi));
  const double slack = 1e-9 * (1.0 + std::abs(lambda));
  if (lambda > lambda_lo + slack || lambda < lambda_hi - slack) {
    throw DomainError("timestep_for_log_snr: lambda outside the schedule's range");
  }
  if (lambda >= lambda_lo) return lo;
  if (lambda <= lambda_hi) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_snr_from_alpha_bar(alpha_bar_at(mid)) > lambda) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw DomainError("make_linear_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw DomainError("make_linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    betas[static_cast<std::size_t>(i)] =
        steps == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (steps - 1);
  }
  return NoiseSchedule(std::move(betas));
}

double log_snr_from_alpha_bar(double alpha_bar) {
  return 0.5 * (std::log(alpha_bar) - std::log1p(-alpha_bar));
}

double alpha_bar_from_log_snr(double lambda) { return 1.0 / (1.0 + std::exp(-2.0 * lambda)); }

TimestepGrid make_timestep_grid(int origin, int count, int total_steps, GridSpacing spacing) {
  if (total_steps < 1 || origin < 1 || origin > total_steps) {
    throw DomainError("make_timestep_grid: origin " + std::to_string(origin) + " outside [1, " +
                      std::to_string(total_steps) + "]");
  }
  if (count < 1) throw DomainError("make_timestep_grid: step budget must be >= 1");
  if (count > origin) {
    throw DomainError("make_timestep_grid: cannot take " + std::to_string(count) +
                      " reverse steps from origin " + std::to_string(origin));
  }
  (void)spacing;  // Uniform is the only spacing.

  TimestepGrid grid;
  grid.origin = origin;
  grid.steps.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    grid.steps.push_back(origin);
    return grid;
  }
  // origin - round(i * (origin - 1) / (count - 1)), exact integer rounding
  // (half away from zero).
  const long long span = origin - 1;
  const long long denom = count - 1;
  for (long long i = 0; i < count; ++i) {
    const long long num = span * i;
    long long offset = num / denom;
    if (2 * (num % denom) >= denom) ++offset;
    grid.steps.push_back(static_cast<int>(origin - offset));
  }
  // Rounding collisions shift downward to keep strict decrease and exact count.
  for (std::size_t i = 1; i < grid.steps.size(); ++i) {
    if (grid.steps[i] >= grid.steps[i - 1]) grid.steps[i] = grid.steps[i - 1] - 1;
  }
  if (grid.steps.back() < 1) throw DomainError("make_timestep_grid: grid underflowed t = 1");
  return grid;
}

}  // namespace astn
