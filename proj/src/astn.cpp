#include "astn/astn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "astn/error.hpp"
#include "astn/forward.hpp"

namespace astn {

std::string regime_label(const RegimeSpec& spec, int total_steps) {
  (void)total_steps;
  switch (spec.regime) {
    case Regime::FullNoise: return "full";
    case Regime::ASTn: return "ast";
    case Regime::DDIMInverted: return spec.inversion_origin == 0 ? "inverted-full" : "inverted";
  }
  return "?";
}

TimestepGrid regime_grid(const RegimeSpec& spec, int total_steps) {
  switch (spec.regime) {
    case Regime::FullNoise:
      return make_timestep_grid(total_steps, spec.n_or_N, total_steps);
    case Regime::ASTn:
      return make_timestep_grid(spec.n_or_N, spec.ast_steps > 0 ? spec.ast_steps : spec.n_or_N,
                                total_steps);
    case Regime::DDIMInverted: {
      const int origin = spec.inversion_origin > 0 ? spec.inversion_origin : total_steps;
      return make_timestep_grid(origin, spec.n_or_N, total_steps);
    }
  }
  throw ConfigError("regime_grid: unknown regime");
}

ImageBuffer ast_n_latent(const ImageBuffer& input, int n, const NoiseSchedule& sched, Rng& rng,
                         const ImageBuffer* eps_override) {
  if (n < 1 || n > sched.steps()) {
    throw DomainError("ast_n_latent: n=" + std::to_string(n) + " outside [1, " +
                      std::to_string(sched.steps()) + "]");
  }
  if (eps_override != nullptr) return q_sample(input, n, *eps_override, sched);
  return q_sample(input, n, rng.normal_image(input.width(), input.height()), sched);
}

SampleResult reconstruct(const RegimeSpec& spec, const ImageBuffer& low_dose,
                         const EpsilonPredictor& pred, const NoiseSchedule& sched, Rng& rng,
                         bool record) {
  SamplerSpec sampler = spec.sampler;
  sampler.grid = regime_grid(spec, sched.steps());
  const ImageBuffer* cond = &low_dose;

  ImageBuffer x_init;
  switch (spec.regime) {
    case Regime::FullNoise:
      x_init = rng.normal_image(low_dose.width(), low_dose.height());
      break;
    case Regime::ASTn:
      x_init = ast_n_latent(low_dose, sampler.grid.origin, sched, rng);
      break;
    case Regime::DDIMInverted:
      x_init = ddim_invert(low_dose, pred, cond, sched, sampler.grid, spec.inversion_mode);
      break;
  }
  return run_sampler(sampler, x_init, pred, cond, sched, rng, record);
}

RegimeToken parse_regime_token(std::string_view token) {
  for (auto t : {RegimeToken::Full, RegimeToken::Ast, RegimeToken::Inverted,
                 RegimeToken::InvertedFull}) {
    if (regime_token(t) == token) return t;
  }
  throw ConfigError("unknown regime '" + std::string(token) + "'");
}

std::string_view regime_token(RegimeToken token) {
  switch (token) {
    case RegimeToken::Full: return "full";
    case RegimeToken::Ast: return "ast";
    case RegimeToken::Inverted: return "inverted";
    case RegimeToken::InvertedFull: return "inverted-full";
  }
  return "?";
}

RegimeSpec make_regime(RegimeToken token, SamplerKind kind, int budget, const SweepConfig& cfg) {
  RegimeSpec spec;
  spec.n_or_N = budget;
  spec.sampler.kind = kind;
  spec.sampler.eta = cfg.eta;
  spec.inversion_mode = cfg.inversion_mode;
  switch (token) {
    case RegimeToken::Full: spec.regime = Regime::FullNoise; break;
    case RegimeToken::Ast: spec.regime = Regime::ASTn; break;
    case RegimeToken::Inverted:
      spec.regime = Regime::DDIMInverted;
      spec.inversion_origin = budget;
      break;
    case RegimeToken::InvertedFull: spec.regime = Regime::DDIMInverted; break;
  }
  return spec;
}

std::vector<RegimeSpec> sweep_cells(const SweepConfig& cfg) {
  std::vector<RegimeSpec> cells;
  for (auto token : cfg.regimes) {
    for (auto kind : cfg.samplers) {
      for (int budget : cfg.budgets) cells.push_back(make_regime(token, kind, budget, cfg));
    }
  }
  return cells;
}

namespace {

struct CellImageResult {
  double psnr = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  double seconds = 0.0;
  bool ok = false;
};

}  // namespace

SweepResult regime_sweep(const SweepConfig& cfg, const std::vector<DosePair>& dataset,
                         const EpsilonPredictor& pred, const NoiseSchedule& sched) {
  if (dataset.empty()) throw DomainError("regime_sweep: empty dataset");
  const auto cells = sweep_cells(cfg);
  const std::size_t n_images = dataset.size();
  const std::size_t n_jobs = cells.size() * n_images;

  // Validate every grid up front so config mistakes fail before any work.
  for (const auto& cell : cells) (void)regime_grid(cell, sched.steps());

  std::vector<CellImageResult> results(n_jobs);
  SweepResult out;
  std::mutex failures_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t job = next++; job < n_jobs; job = next++) {
      const std::size_t c = job / n_images;
      const std::size_t i = job % n_images;
      const auto& cell = cells[c];
      const auto& pair = dataset[i];
      Rng rng(derive_seed(cfg.seed, {c, i}));
      try {
        auto run = timed([&] { return reconstruct(cell, pair.low_dose, pred, sched, rng); });
        auto& r = results[job];
        r.psnr = psnr(pair.full_dose, run.value.image);
        r.rmse = rmse(pair.full_dose, run.value.image);
        r.ssim = ssim(pair.full_dose, run.value.image);
        r.seconds = run.seconds;
        r.ok = true;
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mutex);
        out.failures.push_back(regime_label(cell, sched.steps()) + "/" +
                               std::string(sampler_token(cell.sampler.kind)) + "@" +
                               std::to_string(cell.n_or_N) + " image " + std::to_string(i) +
                               ": " + e.what());
      }
    }
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::sort(out.failures.begin(), out.failures.end());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    MetricsRow row;
    row.regime = regime_label(cells[c], sched.steps());
    row.sampler = std::string(sampler_token(cells[c].sampler.kind));
    row.steps = cells[c].n_or_N;
    row.seed = cfg.seed;
    bool all_ok = true;
    for (std::size_t i = 0; i < n_images; ++i) {
      const auto& r = results[c * n_images + i];
      all_ok = all_ok && r.ok;
      row.psnr_db += r.psnr;
      row.rmse += r.rmse;
      row.ssim += r.ssim;
      row.time_s += r.seconds;
    }
    const auto n = static_cast<double>(n_images);
    if (all_ok) {
      row.psnr_db /= n;
      row.rmse /= n;
      row.ssim /= n;
      row.time_s /= n;
    } else {
      row.psnr_db = row.rmse = row.ssim = row.time_s = nan;
    }
    out.report.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace astn
