#include "astn/inversion.hpp"

#include <cmath>
#include <string>

#include "astn/error.hpp"

namespace astn {

std::string_view inversion_mode_token(InversionMode mode) {
  return mode == InversionMode::LiteralX0 ? "literal_x0" : "predicted_x0";
}

InversionMode parse_inversion_mode(std::string_view token) {
  if (token == "literal_x0") return InversionMode::LiteralX0;
  if (token == "predicted_x0") return InversionMode::PredictedX0;
  throw ConfigError("unknown inversion mode '" + std::string(token) + "'");
}

ImageBuffer ddim_invert(const ImageBuffer& x_start, const EpsilonPredictor& pred,
                        const ImageBuffer* cond, const NoiseSchedule& sched,
                        const TimestepGrid& grid, InversionMode mode) {
  if (grid.steps.empty()) throw DomainError("ddim_invert: empty grid");
  require_finite(x_start, "ddim_invert input");

  ImageBuffer x = x_start;
  int t = 0;
  for (auto it = grid.steps.rbegin(); it != grid.steps.rend(); ++it) {
    const int t_next = *it;
    if (t_next <= t) throw DomainError("ddim_invert: grid must increase when walked in reverse");
    const double abar = sched.alpha_bar(t);
    const double abar_next = sched.alpha_bar(t_next);

    ImageBuffer x0;
    ImageBuffer eps;
    if (mode == InversionMode::LiteralX0) {
      x0 = x_start;
      // At t = 0 the implied noise (x - x_start)/0 has limit 0.
      eps = t == 0 ? ImageBuffer(x.width(), x.height())
                   : axpby(1.0 / std::sqrt(1.0 - abar), x, -std::sqrt(abar / (1.0 - abar)),
                           x_start);
    } else if (t == 0) {
      x0 = x;
      eps = pred.predict(x, t_next, cond, sched);
    } else {
      eps = pred.predict(x, t, cond, sched);
      x0 = predict_x0(x, t, eps, sched);
    }
    x = axpby(std::sqrt(abar_next), x0, std::sqrt(1.0 - abar_next), eps);
    if (!x.all_finite()) {
      throw NumericalError("ddim_invert: non-finite latent at t=" + std::to_string(t_next));
    }
    t = t_next;
  }
  return x;
}

ImageBuffer invert_then_reconstruct(const ImageBuffer& x_start, const EpsilonPredictor& pred,
                                    const ImageBuffer* cond, const NoiseSchedule& sched,
                                    const TimestepGrid& invert_grid,
                                    const SamplerSpec& sample_spec, Rng& rng, InversionMode mode) {
  if (sample_spec.grid.steps.empty() || sample_spec.grid.steps.front() != invert_grid.origin) {
    throw DomainError("invert_then_reconstruct: sampling grid must start at the inversion origin");
  }
  const ImageBuffer latent = ddim_invert(x_start, pred, cond, sched, invert_grid, mode);
  return run_sampler(sample_spec, latent, pred, cond, sched, rng).image;
}

}  // namespace astn
