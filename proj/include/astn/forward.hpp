#pragma once

#include <vector>

#include "astn/denoiser.hpp"
#include "astn/image.hpp"
#include "astn/rng.hpp"
#include "astn/schedule.hpp"

namespace astn {

/// Closed-form forward diffusion: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
ImageBuffer q_sample(const ImageBuffer& x0, int t, const ImageBuffer& eps,
                     const NoiseSchedule& sched);

struct MarginalMoments {
  ImageBuffer mean;
  double var = 0.0;
};

/// Moments of q(x_t | x_0): mean sqrt(abar_t) x0, isotropic variance 1 - abar_t.
MarginalMoments marginal_moments(const ImageBuffer& x0, int t, const NoiseSchedule& sched);

/// Monte Carlo estimate of the eps-prediction objective: for each item,
/// t ~ U{1..T}, eps ~ N(0, I), x_t = q_sample(x0, t, eps); returns the mean
/// over items and pixels of (pred(x_t, t, c) - eps)^2. `cond_batch` is
/// either empty (no condition) or aligned with `x0_batch`.
double training_loss(const EpsilonPredictor& pred, const std::vector<ImageBuffer>& x0_batch,
                     const std::vector<ImageBuffer>& cond_batch, const NoiseSchedule& sched,
                     Rng& rng);

}  // namespace astn
