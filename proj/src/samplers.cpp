#include "astn/samplers.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "astn/error.hpp"

namespace astn {

namespace {

void check_step(int t, int t_prev, const NoiseSchedule& sched, std::string_view who) {
  if (t_prev < 0 || t_prev >= t || t > sched.steps()) {
    throw DomainError(std::string(who) + ": invalid step " + std::to_string(t) + " -> " +
                      std::to_string(t_prev));
  }
}

/// Data prediction at integer t from a fresh model evaluation.
ImageBuffer data_prediction(const ImageBuffer& x_t, int t, const EpsilonPredictor& pred,
                            const ImageBuffer* cond, const NoiseSchedule& sched) {
  return predict_x0(x_t, t, pred.predict(x_t, t, cond, sched), sched);
}

}  // namespace

std::string_view sampler_token(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::DDPM: return "ddpm";
    case SamplerKind::DDIM: return "ddim";
    case SamplerKind::DPM1: return "dpm1";
    case SamplerKind::DPM2: return "dpm2";
    case SamplerKind::DPMpp2M: return "dpmpp";
    case SamplerKind::UniPC2: return "unipc";
  }
  return "?";
}

SamplerKind parse_sampler_kind(std::string_view token) {
  for (auto k : {SamplerKind::DDPM, SamplerKind::DDIM, SamplerKind::DPM1, SamplerKind::DPM2,
                 SamplerKind::DPMpp2M, SamplerKind::UniPC2}) {
    if (sampler_token(k) == token) return k;
  }
  throw ConfigError("unknown sampler '" + std::string(token) + "'");
}

ImageBuffer predict_x0(const ImageBuffer& x_t, NoiseLevel level, const ImageBuffer& eps_hat) {
  require_same_shape(x_t, eps_hat, "predict_x0");
  const double sa = std::sqrt(level.alpha_bar);
  return axpby(1.0 / sa, x_t, -std::sqrt(1.0 - level.alpha_bar) / sa, eps_hat);
}

ImageBuffer predict_x0(const ImageBuffer& x_t, int t, const ImageBuffer& eps_hat,
                       const NoiseSchedule& sched) {
  if (t < 1) throw DomainError("predict_x0: t must be >= 1");
  return predict_x0(x_t, NoiseLevel::at(sched, t), eps_hat);
}

ImageBuffer ddpm_step(const ImageBuffer& x_t, int t, int t_prev, const EpsilonPredictor& pred,
                      const ImageBuffer* cond, const NoiseSchedule& sched, Rng& rng) {
  check_step(t, t_prev, sched, "ddpm_step");
  const ImageBuffer x0 = data_prediction(x_t, t, pred, cond, sched);
  if (t_prev == 0) return x0;

  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const double ratio = abar / abar_prev;
  const double beta_tilde = (1.0 - abar_prev) / (1.0 - abar) * (1.0 - ratio);
  const double c0 = std::sqrt(abar_prev) * (1.0 - ratio) / (1.0 - abar);
  const double ct = std::sqrt(ratio) * (1.0 - abar_prev) / (1.0 - abar);

  ImageBuffer out = axpby(c0, x0, ct, x_t);
  const double sd = std::sqrt(beta_tilde);
  for (double& v : out.values()) v += sd * rng.normal();
  return out;
}

ImageBuffer ddim_step(const ImageBuffer& x_t, int t, int t_prev, const EpsilonPredictor& pred,
                      const ImageBuffer* cond, const NoiseSchedule& sched, double eta, Rng& rng) {
  check_step(t, t_prev, sched, "ddim_step");
  if (!(eta >= 0.0)) throw DomainError("ddim_step: eta must be >= 0");
  const ImageBuffer eps = pred.predict(x_t, t, cond, sched);
  const ImageBuffer x0 = predict_x0(x_t, t, eps, sched);
  if (t_prev == 0) return x0;

  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const double sigma =
      eta * std::sqrt((1.0 - abar_prev) / (1.0 - abar)) * std::sqrt(1.0 - abar / abar_prev);
  const double dir_var = 1.0 - abar_prev - sigma * sigma;
  if (dir_var < 0.0) {
    throw DomainError("ddim_step: sigma^2 exceeds 1 - abar_prev (eta=" + std::to_string(eta) + ")");
  }
  ImageBuffer out = axpby(std::sqrt(abar_prev), x0, std::sqrt(dir_var), eps);
  if (sigma > 0.0) {
    for (double& v : out.values()) v += sigma * rng.normal();
  }
  return out;
}

ImageBuffer dpm_solver_1_step(const ImageBuffer& x_t, int t, int t_prev,
                              const EpsilonPredictor& pred, const ImageBuffer* cond,
                              const NoiseSchedule& sched) {
  check_step(t, t_prev, sched, "dpm_solver_1_step");
  const ImageBuffer eps = pred.predict(x_t, t, cond, sched);
  if (t_prev == 0) return predict_x0(x_t, t, eps, sched);

  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const double h = sched.log_snr(t_prev) - sched.log_snr(t);
  return axpby(std::sqrt(abar_prev / abar), x_t, -std::sqrt(1.0 - abar_prev) * std::expm1(h), eps);
}

ImageBuffer dpm_solver_2_step(const ImageBuffer& x_t, int t, int t_prev,
                              const EpsilonPredictor& pred, const ImageBuffer* cond,
                              const NoiseSchedule& sched) {
  check_step(t, t_prev, sched, "dpm_solver_2_step");
  const ImageBuffer eps_t = pred.predict(x_t, t, cond, sched);
  if (t_prev == 0) return predict_x0(x_t, t, eps_t, sched);

  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const double lambda_t = sched.log_snr(t);
  const double h = sched.log_snr(t_prev) - lambda_t;
  const double lambda_mid = lambda_t + 0.5 * h;
  const NoiseLevel mid{sched.timestep_for_log_snr(lambda_mid), alpha_bar_from_log_snr(lambda_mid)};

  const ImageBuffer u = axpby(std::sqrt(mid.alpha_bar / abar), x_t,
                              -std::sqrt(1.0 - mid.alpha_bar) * std::expm1(0.5 * h), eps_t);
  const ImageBuffer eps_mid = pred.predict(u, mid, cond);
  return axpby(std::sqrt(abar_prev / abar), x_t, -std::sqrt(1.0 - abar_prev) * std::expm1(h),
               eps_mid);
}

ImageBuffer dpm_solver_pp_2m_step(MultistepState& state, const ImageBuffer& x_t, int t, int t_prev,
                                  const EpsilonPredictor& pred, const ImageBuffer* cond,
                                  const NoiseSchedule& sched) {
  check_step(t, t_prev, sched, "dpm_solver_pp_2m_step");
  ImageBuffer x0 = data_prediction(x_t, t, pred, cond, sched);
  if (t_prev == 0) {
    state.previous.reset();
    return x0;
  }

  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const double lambda_t = sched.log_snr(t);
  const double h = sched.log_snr(t_prev) - lambda_t;

  ImageBuffer d = x0;
  if (state.previous) {
    const double r = (lambda_t - state.previous->lambda) / h;
    const double k = 0.5 / r;
    d = axpby(1.0 + k, x0, -k, state.previous->x0);
  }
  ImageBuffer out = axpby(std::sqrt((1.0 - abar_prev) / (1.0 - abar)), x_t,
                          -std::sqrt(abar_prev) * std::expm1(-h), d);
  state.previous = DataPrediction{t, lambda_t, std::move(x0)};
  return out;
}

ImageBuffer unipc_step(MultistepState& state, const ImageBuffer& x_t, int t, int t_prev,
                       const EpsilonPredictor& pred, const ImageBuffer* cond,
                       const NoiseSchedule& sched) {
  check_step(t, t_prev, sched, "unipc_step");
  if (t_prev == 0) {
    // Fresh evaluation at the corrected point.
    state = MultistepState{};
    return data_prediction(x_t, t, pred, cond, sched);
  }

  const double lambda_t = sched.log_snr(t);
  ImageBuffer m0 = (state.landing && state.landing->t == t)
                       ? std::move(state.landing->x0)
                       : data_prediction(x_t, t, pred, cond, sched);
  state.landing.reset();

  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const double alpha_prev = std::sqrt(abar_prev);
  const double lambda_prev = sched.log_snr(t_prev);
  const double h = lambda_prev - lambda_t;
  const double hh = -h;
  const double h_phi_1 = std::expm1(hh);
  const double b_h = hh;

  // First-order data-prediction base shared by predictor and corrector.
  const ImageBuffer base =
      axpby(std::sqrt((1.0 - abar_prev) / (1.0 - abar)), x_t, -alpha_prev * h_phi_1, m0);

  std::optional<ImageBuffer> d1;
  double r = 0.0;
  if (state.previous) {
    r = (state.previous->lambda - lambda_t) / h;
    d1 = axpby(1.0 / r, state.previous->x0, -1.0 / r, m0);
  }

  // Predictor (order 2 uses rho_p = 1/2).
  const ImageBuffer x_pred = d1 ? axpby(1.0, base, -alpha_prev * b_h * 0.5, *d1) : base;

  // Corrector with the model output at the predicted point.
  ImageBuffer m_t = data_prediction(x_pred, t_prev, pred, cond, sched);
  const ImageBuffer d1_t = axpby(1.0, m_t, -1.0, m0);
  ImageBuffer x_corr;
  if (!d1) {
    x_corr = axpby(1.0, base, -alpha_prev * b_h * 0.5, d1_t);
  } else {
    double h_phi_k = h_phi_1 / hh - 1.0;
    const double b1 = h_phi_k / b_h;
    h_phi_k = h_phi_k / hh - 0.5;
    const double b2 = h_phi_k * 2.0 / b_h;
    // Solve [[1, 1], [r, 1]] rho = [b1, b2].
    const double rho0 = (b1 - b2) / (1.0 - r);
    const double rho1 = b1 - rho0;
    x_corr = axpby(1.0, base, -alpha_prev * b_h * rho0, *d1);
    x_corr = axpby(1.0, x_corr, -alpha_prev * b_h * rho1, d1_t);
  }

  state.previous = DataPrediction{t, lambda_t, std::move(m0)};
  state.landing = DataPrediction{t_prev, lambda_prev, std::move(m_t)};
  return x_corr;
}

long long predictor_evaluations(SamplerKind kind, std::size_t grid_size) {
  const auto n = static_cast<long long>(grid_size);
  if (n == 0) return 0;
  switch (kind) {
    case SamplerKind::DPM2: return 2 * n - 1;
    case SamplerKind::UniPC2: return n == 1 ? 1 : n + 1;
    default: return n;
  }
}

SampleResult run_sampler(const SamplerSpec& spec, const ImageBuffer& x_init,
                         const EpsilonPredictor& pred, const ImageBuffer* cond,
                         const NoiseSchedule& sched, Rng& rng, bool record) {
  const auto& steps = spec.grid.steps;
  if (steps.empty()) throw DomainError("run_sampler: empty timestep grid");
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i] >= steps[i - 1]) throw DomainError("run_sampler: grid is not strictly decreasing");
  }
  require_finite(x_init, "run_sampler initial latent");

  SampleResult result{x_init, {}};
  ImageBuffer& x = result.image;
  if (record) {
    result.trajectory.timesteps.push_back(steps.front());
    result.trajectory.snapshots.push_back(x);
  }
  MultistepState state;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const int t_prev = i + 1 < steps.size() ? steps[i + 1] : 0;
    const auto start = std::chrono::steady_clock::now();
    switch (spec.kind) {
      case SamplerKind::DDPM: x = ddpm_step(x, t, t_prev, pred, cond, sched, rng); break;
      case SamplerKind::DDIM: x = ddim_step(x, t, t_prev, pred, cond, sched, spec.eta, rng); break;
      case SamplerKind::DPM1: x = dpm_solver_1_step(x, t, t_prev, pred, cond, sched); break;
      case SamplerKind::DPM2: x = dpm_solver_2_step(x, t, t_prev, pred, cond, sched); break;
      case SamplerKind::DPMpp2M:
        x = dpm_solver_pp_2m_step(state, x, t, t_prev, pred, cond, sched);
        break;
      case SamplerKind::UniPC2: x = unipc_step(state, x, t, t_prev, pred, cond, sched); break;
    }
    if (!x.all_finite()) {
      throw NumericalError("run_sampler(" + std::string(sampler_token(spec.kind)) +
                           "): non-finite value after step " + std::to_string(t) + " -> " +
                           std::to_string(t_prev));
    }
    if (record) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      result.trajectory.step_seconds.push_back(dt.count());
      result.trajectory.timesteps.push_back(t_prev);
      result.trajectory.snapshots.push_back(x);
    }
  }
  return result;
}

}  // namespace astn
