#pragma once

#include <string_view>

#include "astn/denoiser.hpp"
#include "astn/image.hpp"
#include "astn/samplers.hpp"
#include "astn/schedule.hpp"

namespace astn {

enum class InversionMode {
  /// x0 held fixed at the input image for every step (the rule as usually
  /// printed). Degenerates to x_t = sqrt(abar_t) * x_start.
  LiteralX0,
  /// x0 re-estimated from the model at every step.
  PredictedX0,
};

std::string_view inversion_mode_token(InversionMode mode);
InversionMode parse_inversion_mode(std::string_view token);

/// Deterministic DDIM inversion. Walks the grid upward from t = 0 (x_start)
/// through grid.steps in reverse order and returns the latent at
/// grid.origin. The first hop out of t = 0 evaluates the model at the first
/// grid point, since the implied noise is undefined at t = 0.
ImageBuffer ddim_invert(const ImageBuffer& x_start, const EpsilonPredictor& pred,
                        const ImageBuffer* cond, const NoiseSchedule& sched,
                        const TimestepGrid& grid, InversionMode mode = InversionMode::PredictedX0);

/// ddim_invert followed by run_sampler from the inverted latent.
/// `sample_spec.grid.origin` must equal `invert_grid.origin`.
ImageBuffer invert_then_reconstruct(const ImageBuffer& x_start, const EpsilonPredictor& pred,
                                    const ImageBuffer* cond, const NoiseSchedule& sched,
                                    const TimestepGrid& invert_grid,
                                    const SamplerSpec& sample_spec, Rng& rng,
                                    InversionMode mode = InversionMode::PredictedX0);

}  // namespace astn
