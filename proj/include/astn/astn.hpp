#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "astn/data.hpp"
#include "astn/denoiser.hpp"
#include "astn/image.hpp"
#include "astn/inversion.hpp"
#include "astn/metrics.hpp"
#include "astn/rng.hpp"
#include "astn/samplers.hpp"
#include "astn/schedule.hpp"

namespace astn {

enum class Regime {
  /// x_T ~ N(0, I), N uniform steps from T.
  FullNoise,
  /// Closed-form noising of the low-dose input to x_n, then n reverse steps.
  ASTn,
  /// DDIM inversion of the low-dose input to the origin, then sampling on
  /// the same grid.
  DDIMInverted,
};

struct RegimeSpec {
  Regime regime = Regime::ASTn;
  /// AST origin n, or the step budget N for the other regimes.
  int n_or_N = 150;
  /// Sampler kind and eta; the grid is derived from the regime.
  SamplerSpec sampler;
  /// ASTn only: reverse steps from n. 0 means dense (n steps).
  int ast_steps = 0;
  /// DDIMInverted only: latent origin. 0 means T (pairs with FullNoise);
  /// setting it to n_or_N gives the inverted counterpart of AST-n.
  int inversion_origin = 0;
  InversionMode inversion_mode = InversionMode::PredictedX0;
};

/// CSV/config label: "full", "ast", "inverted-full" or "inverted" (the
/// AST-paired inversion, origin = n).
std::string regime_label(const RegimeSpec& spec, int total_steps);

/// Grid the regime samples on.
TimestepGrid regime_grid(const RegimeSpec& spec, int total_steps);

/// q_sample(input, n, eps) with fresh eps from `rng`, or with `eps_override`
/// when given. The low-dose input stands in for x_0.
ImageBuffer ast_n_latent(const ImageBuffer& input, int n, const NoiseSchedule& sched, Rng& rng,
                         const ImageBuffer* eps_override = nullptr);

/// Builds the regime's initial latent and runs the sampler, conditioning on
/// `low_dose` at every step.
SampleResult reconstruct(const RegimeSpec& spec, const ImageBuffer& low_dose,
                         const EpsilonPredictor& pred, const NoiseSchedule& sched, Rng& rng,
                         bool record = false);

/// Regime token as used in configs: full, ast, inverted, inverted-full.
enum class RegimeToken { Full, Ast, Inverted, InvertedFull };
RegimeToken parse_regime_token(std::string_view token);
std::string_view regime_token(RegimeToken token);

struct SweepConfig {
  std::vector<RegimeToken> regimes{RegimeToken::Full, RegimeToken::Ast};
  std::vector<SamplerKind> samplers{SamplerKind::DDIM};
  /// AST origins / step budgets.
  std::vector<int> budgets{150};
  double eta = 0.0;
  InversionMode inversion_mode = InversionMode::PredictedX0;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// One evaluated (regime, sampler, budget) combination, in sweep order.
RegimeSpec make_regime(RegimeToken token, SamplerKind kind, int budget, const SweepConfig& cfg);
std::vector<RegimeSpec> sweep_cells(const SweepConfig& cfg);

struct SweepResult {
  MetricsReport report;
  /// "label: message" for every failed (cell, image); failed cells report NaN.
  std::vector<std::string> failures;
};

/// Runs every cell over every image. Each (cell, image) draws from its own
/// stream derived from cfg.seed, so results do not depend on the thread
/// count. Rows carry mean metrics against the full-dose image and mean wall
/// time per image.
SweepResult regime_sweep(const SweepConfig& cfg, const std::vector<DosePair>& dataset,
                         const EpsilonPredictor& pred, const NoiseSchedule& sched);

}  // namespace astn
