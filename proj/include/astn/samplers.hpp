#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "astn/denoiser.hpp"
#include "astn/image.hpp"
#include "astn/rng.hpp"
#include "astn/schedule.hpp"

namespace astn {

enum class SamplerKind { DDPM, DDIM, DPM1, DPM2, DPMpp2M, UniPC2 };

/// Config/CSV token: ddpm, ddim, dpm1, dpm2, dpmpp, unipc.
std::string_view sampler_token(SamplerKind kind);
/// Throws ConfigError naming the token when unknown.
SamplerKind parse_sampler_kind(std::string_view token);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::DDIM;
  /// DDIM stochasticity (0 = deterministic). Ignored by the ODE solvers.
  double eta = 0.0;
  TimestepGrid grid;
};

struct TrajectoryRecord {
  /// (t, x_t) pairs from the origin down to t = 0; empty unless recording.
  std::vector<int> timesteps;
  std::vector<ImageBuffer> snapshots;
  /// Wall time of each reverse step, seconds; empty unless recording.
  std::vector<double> step_seconds;
};

/// x_0 estimate implied by an eps estimate: (x_t - sqrt(1-abar) eps) / sqrt(abar).
ImageBuffer predict_x0(const ImageBuffer& x_t, int t, const ImageBuffer& eps_hat,
                       const NoiseSchedule& sched);
ImageBuffer predict_x0(const ImageBuffer& x_t, NoiseLevel level, const ImageBuffer& eps_hat);

// Single reverse steps from t to t_prev < t. A hop to t_prev = 0 returns the
// data prediction x_0 without noise for every solver.

/// Ancestral step: posterior mean of q(x_prev | x_t, x0_hat) plus sqrt(beta_tilde) z.
ImageBuffer ddpm_step(const ImageBuffer& x_t, int t, int t_prev, const EpsilonPredictor& pred,
                      const ImageBuffer* cond, const NoiseSchedule& sched, Rng& rng);

/// Generalized DDIM step; eta = 0 is deterministic and never touches `rng`.
ImageBuffer ddim_step(const ImageBuffer& x_t, int t, int t_prev, const EpsilonPredictor& pred,
                      const ImageBuffer* cond, const NoiseSchedule& sched, double eta, Rng& rng);

/// First-order exponential integrator in log-SNR (noise prediction).
ImageBuffer dpm_solver_1_step(const ImageBuffer& x_t, int t, int t_prev,
                              const EpsilonPredictor& pred, const ImageBuffer* cond,
                              const NoiseSchedule& sched);

/// Single-step second-order solver: the noise estimate is re-evaluated at the
/// log-SNR midpoint and used in the first-order update.
ImageBuffer dpm_solver_2_step(const ImageBuffer& x_t, int t, int t_prev,
                              const EpsilonPredictor& pred, const ImageBuffer* cond,
                              const NoiseSchedule& sched);

struct DataPrediction {
  int t = 0;
  double lambda = 0.0;
  ImageBuffer x0;
};

/// History carried between multistep solver calls. Start each trajectory
/// with a fresh state.
struct MultistepState {
  /// Data prediction at the previous grid point.
  std::optional<DataPrediction> previous;
  /// UniPC: model output evaluated at the last predicted point, reused as the
  /// next step's current output.
  std::optional<DataPrediction> landing;
};

/// Second-order multistep data-prediction solver; the first step of a
/// trajectory is first order.
ImageBuffer dpm_solver_pp_2m_step(MultistepState& state, const ImageBuffer& x_t, int t, int t_prev,
                                  const EpsilonPredictor& pred, const ImageBuffer* cond,
                                  const NoiseSchedule& sched);

/// Order-2 predictor-corrector with B(h) = h, data prediction. The corrector
/// re-solves the step with the model output at the predicted point; that
/// output is cached in `state` for the next step.
ImageBuffer unipc_step(MultistepState& state, const ImageBuffer& x_t, int t, int t_prev,
                       const EpsilonPredictor& pred, const ImageBuffer* cond,
                       const NoiseSchedule& sched);

/// Predictor evaluations run_sampler makes for a grid of `grid_size` points.
long long predictor_evaluations(SamplerKind kind, std::size_t grid_size);

struct SampleResult {
  ImageBuffer image;
  TrajectoryRecord trajectory;
};

/// Folds the sampler's step over consecutive grid points and a final hop to
/// t = 0. `x_init` is the latent at the grid origin. Throws NumericalError
/// naming the timestep if a step produces NaN/Inf.
SampleResult run_sampler(const SamplerSpec& spec, const ImageBuffer& x_init,
                         const EpsilonPredictor& pred, const ImageBuffer* cond,
                         const NoiseSchedule& sched, Rng& rng, bool record = false);

}  // namespace astn
