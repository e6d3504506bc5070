#include <doctest.h>

#include <cmath>

#include "astn/astn.hpp"
#include "astn/error.hpp"
#include "astn/forward.hpp"
#include "helpers.hpp"

using namespace astn;

namespace {

/// Returns NaN when the condition is bright, so selected images fail.
class FragilePredictor final : public EpsilonPredictor {
 public:
  bool requires_condition() const override { return true; }
  std::string name() const override { return "fragile"; }

 protected:
  ImageBuffer estimate(const ImageBuffer& x_t, NoiseLevel, const ImageBuffer* cond) const override {
    ImageBuffer out(x_t.width(), x_t.height());
    if (cond->mean() > 0.5) out.values()[0] = std::nan("");
    return out;
  }
};

std::vector<DosePair> tiny_dataset(int n) {
  std::vector<DosePair> pairs;
  for (int i = 0; i < n; ++i) {
    PhantomSpec spec;
    spec.size = 32;
    spec.seed = static_cast<std::uint64_t>(i);
    auto full = generate_phantom(spec);
    Rng rng(100 + static_cast<std::uint64_t>(i));
    auto low = simulate_low_dose(full, 0.25, rng);
    pairs.push_back({std::move(full), std::move(low), 0.25});
  }
  return pairs;
}

}  // namespace

TEST_SUITE("astn") {
  const NoiseSchedule sched = make_linear_schedule(1000, 1e-4, 0.02);

  TEST_CASE("regime grids and labels") {
    RegimeSpec full{Regime::FullNoise, 25};
    CHECK(regime_grid(full, 1000).origin == 1000);
    CHECK(regime_grid(full, 1000).size() == 25);
    CHECK(regime_label(full, 1000) == "full");

    RegimeSpec ast{Regime::ASTn, 150};
    CHECK(regime_grid(ast, 1000).origin == 150);
    CHECK(regime_grid(ast, 1000).size() == 150);
    ast.ast_steps = 10;
    CHECK(regime_grid(ast, 1000).size() == 10);
    CHECK(regime_label(ast, 1000) == "ast");

    RegimeSpec inv{Regime::DDIMInverted, 50};
    CHECK(regime_grid(inv, 1000).origin == 1000);
    CHECK(regime_label(inv, 1000) == "inverted-full");
    inv.inversion_origin = 50;
    CHECK(regime_grid(inv, 1000).origin == 50);
    CHECK(regime_label(inv, 1000) == "inverted");

    for (auto t : {RegimeToken::Full, RegimeToken::Ast, RegimeToken::Inverted, RegimeToken::InvertedFull}) {
      CHECK(parse_regime_token(regime_token(t)) == t);
    }
    CHECK_THROWS_AS(parse_regime_token("sparse"), ConfigError);
  }

  TEST_CASE("AST-n latent is the closed-form noising of the input") {
    const auto y = test::pattern(6, 6);
    Rng rng(1);
    const auto eps = rng.normal_image(6, 6);
    CHECK(ast_n_latent(y, 150, sched, rng, &eps) == q_sample(y, 150, eps, sched));
    CHECK_THROWS_AS(ast_n_latent(y, 0, sched, rng), DomainError);
    CHECK_THROWS_AS(ast_n_latent(y, 1001, sched, rng), DomainError);
  }

  TEST_CASE("exact predictor: every regime reconstructs the data exactly") {
    const auto m = test::pattern(8, 8);
    GaussianOraclePredictor exact({m, 0.0});
    for (auto regime : {Regime::FullNoise, Regime::ASTn, Regime::DDIMInverted}) {
      for (auto kind : {SamplerKind::DDPM, SamplerKind::DDIM, SamplerKind::DPM2, SamplerKind::UniPC2}) {
        RegimeSpec spec{regime, 20};
        spec.sampler.kind = kind;
        Rng rng(3);
        const auto out = reconstruct(spec, test::pattern(8, 8, 0.4), exact, sched, rng);
        CHECK(test::max_abs_diff(out.image, m) < 1e-9);
      }
    }
  }

  TEST_CASE("sweep is reproducible and thread-count independent") {
    const auto data = tiny_dataset(3);
    ConditionedOraclePredictor pred({ImageBuffer(32, 32, 0.3), 0.01}, 0.02);
    SweepConfig cfg;
    cfg.regimes = {RegimeToken::Full, RegimeToken::Ast, RegimeToken::Inverted};
    cfg.samplers = {SamplerKind::DDPM, SamplerKind::DPMpp2M};
    cfg.budgets = {5, 10};
    cfg.seed = 9;
    const auto a = regime_sweep(cfg, data, pred, sched);
    cfg.threads = 3;
    const auto b = regime_sweep(cfg, data, pred, sched);
    REQUIRE(a.report.rows.size() == 12);
    REQUIRE(b.report.rows.size() == 12);
    CHECK(a.failures.empty());
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(a.report.rows[i].regime == b.report.rows[i].regime);
      CHECK(a.report.rows[i].psnr_db == b.report.rows[i].psnr_db);
      CHECK(a.report.rows[i].ssim == b.report.rows[i].ssim);
      CHECK(std::isfinite(a.report.rows[i].psnr_db));
    }
    CHECK(a.report.rows[0].regime == "full");
    CHECK(a.report.rows[0].sampler == "ddpm");
    CHECK(a.report.rows[0].steps == 5);
    CHECK(a.report.rows[11].regime == "inverted");
  }

  TEST_CASE("failed cells are reported and the sweep continues") {
    auto data = tiny_dataset(2);
    data[1].low_dose = ImageBuffer(32, 32, 0.9);
    FragilePredictor pred;
    SweepConfig cfg;
    cfg.regimes = {RegimeToken::Ast};
    cfg.budgets = {5};
    const auto res = regime_sweep(cfg, data, pred, sched);
    REQUIRE(res.report.rows.size() == 1);
    CHECK(std::isnan(res.report.rows[0].psnr_db));
    REQUIRE(res.failures.size() == 1);
    CHECK(res.failures[0].find("image 1") != std::string::npos);
  }

  TEST_CASE("invalid budgets fail before any work") {
    const auto data = tiny_dataset(1);
    ZeroPredictor zero;
    SweepConfig cfg;
    cfg.budgets = {1001};
    CHECK_THROWS_AS(regime_sweep(cfg, data, zero, sched), DomainError);
    CHECK_THROWS_AS(regime_sweep(SweepConfig{}, {}, zero, sched), DomainError);
  }
}
