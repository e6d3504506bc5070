#include <doctest.h>

#include <cmath>
#include <string>

#include "astn/error.hpp"
#include "astn/forward.hpp"
#include "astn/samplers.hpp"
#include "helpers.hpp"

using namespace astn;

namespace {

const SamplerKind kAll[] = {SamplerKind::DDPM, SamplerKind::DDIM,    SamplerKind::DPM1,
                            SamplerKind::DPM2, SamplerKind::DPMpp2M, SamplerKind::UniPC2};

TimestepGrid custom_grid(std::vector<int> steps) {
  TimestepGrid g;
  g.origin = steps.front();
  g.steps = std::move(steps);
  return g;
}

}  // namespace

TEST_SUITE("samplers") {
  const NoiseSchedule sched = make_linear_schedule(1000, 1e-4, 0.02);

  TEST_CASE("tokens round-trip and unknown tokens are named") {
    for (auto k : kAll) CHECK(parse_sampler_kind(sampler_token(k)) == k);
    try {
      (void)parse_sampler_kind("euler");
      FAIL("expected throw");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("euler") != std::string::npos);
    }
  }

  TEST_CASE("DDIM step matches the reference value") {
    ConstantPredictor pred(test::scalar(0.2));
    Rng rng(0);
    const auto x = ddim_step(test::scalar(0.7), 500, 480, pred, nullptr, sched, 0.0, rng);
    CHECK(x[0] == doctest::Approx(0.751064710519058567).epsilon(1e-12));
  }

  TEST_CASE("DDPM step uses the posterior-mean coefficients") {
    ConstantPredictor pred(test::scalar(0.2));
    const double c0 = 0.060336578286594193551;
    const double ct = 0.88883149501717596176;
    const double beta_tilde = 0.1762699605027723085;
    const double a = sched.alpha_bar(500);
    const double x0 = (0.7 - std::sqrt(1 - a) * 0.2) / std::sqrt(a);
    Rng rng(17);
    Rng shadow(17);
    const auto x = ddpm_step(test::scalar(0.7), 500, 480, pred, nullptr, sched, rng);
    const double z = shadow.normal();
    CHECK(x[0] == doctest::Approx(c0 * x0 + ct * 0.7 + std::sqrt(beta_tilde) * z).epsilon(1e-12));
  }

  TEST_CASE("deterministic DDIM with the exact predictor walks the forward marginals") {
    const auto m = test::pattern(5, 5);
    GaussianOraclePredictor exact({m, 0.0});
    Rng rng(2);
    const auto eps = rng.normal_image(5, 5);
    for (auto [t, tp] : {std::pair{1000, 999}, {700, 150}, {150, 1}, {42, 0}}) {
      const auto x = ddim_step(q_sample(m, t, eps, sched), t, tp, exact, nullptr, sched, 0.0, rng);
      CHECK(test::max_abs_diff(x, q_sample(m, tp, eps, sched)) < 1e-10);
    }
  }

  TEST_CASE("eta = 0 never draws; eta > 0 is seed-reproducible") {
    ConstantPredictor pred(test::scalar(0.1));
    Rng a(5);
    (void)ddim_step(test::scalar(0.3), 300, 200, pred, nullptr, sched, 0.0, a);
    Rng fresh(5);
    CHECK(a.normal() == fresh.normal());

    Rng r1(8);
    Rng r2(8);
    const auto x1 = ddim_step(test::scalar(0.3), 300, 200, pred, nullptr, sched, 1.0, r1);
    const auto x2 = ddim_step(test::scalar(0.3), 300, 200, pred, nullptr, sched, 1.0, r2);
    CHECK(x1 == x2);
    CHECK_THROWS_AS(ddim_step(test::scalar(0.3), 300, 200, pred, nullptr, sched, -1.0, r1),
                    DomainError);
  }

  TEST_CASE("DPM-Solver-1 equals deterministic DDIM") {
    GaussianOraclePredictor oracle({test::pattern(4, 4), 0.03});
    Rng rng(4);
    const auto x = rng.normal_image(4, 4);
    for (auto [t, tp] : {std::pair{1000, 900}, {500, 100}, {20, 1}}) {
      const auto a = ddim_step(x, t, tp, oracle, nullptr, sched, 0.0, rng);
      const auto b = dpm_solver_1_step(x, t, tp, oracle, nullptr, sched);
      CHECK(test::max_abs_diff(a, b) < 1e-12);
    }
  }

  TEST_CASE("second-order solvers match the reference values") {
    GaussianOraclePredictor oracle({test::scalar(0.3), 0.04});
    const auto dpm2 = dpm_solver_2_step(test::scalar(0.5), 500, 400, oracle, nullptr, sched);
    CHECK(dpm2[0] == doctest::Approx(0.52248711683739954286).epsilon(1e-11));

    Rng rng(0);
    const auto grid = custom_grid({600, 400, 200});
    const auto pp =
        run_sampler({SamplerKind::DPMpp2M, 0.0, grid}, test::scalar(0.5), oracle, nullptr, sched, rng);
    CHECK(pp.image[0] == doctest::Approx(0.32422178867315460037).epsilon(1e-12));

    CountingPredictor counter(oracle);
    const auto uni =
        run_sampler({SamplerKind::UniPC2, 0.0, grid}, test::scalar(0.5), counter, nullptr, sched, rng);
    CHECK(uni.image[0] == doctest::Approx(0.324558209812835796).epsilon(1e-12));
    CHECK(counter.count() == 4);
  }

  TEST_CASE("evaluation counts match predictor_evaluations") {
    GaussianOraclePredictor oracle({test::pattern(3, 3), 0.02});
    for (auto kind : kAll) {
      for (int n : {1, 2, 10}) {
        CountingPredictor counter(oracle);
        Rng rng(1);
        const auto grid = make_timestep_grid(200, n, 1000);
        (void)run_sampler({kind, 0.0, grid}, rng.normal_image(3, 3), counter, nullptr, sched, rng);
        CAPTURE(sampler_token(kind));
        CAPTURE(n);
        CHECK(counter.count() == predictor_evaluations(kind, grid.size()));
      }
    }
    CHECK(predictor_evaluations(SamplerKind::DPM2, 10) == 19);
    CHECK(predictor_evaluations(SamplerKind::UniPC2, 10) == 11);
  }

  TEST_CASE("every solver's final hop returns the data prediction") {
    GaussianOraclePredictor oracle({test::pattern(3, 3), 0.02});
    Rng rng(3);
    const auto x = rng.normal_image(3, 3);
    const auto want = predict_x0(x, 37, oracle.predict(x, 37, nullptr, sched), sched);
    for (auto kind : kAll) {
      const auto got = run_sampler({kind, 0.0, custom_grid({37})}, x, oracle, nullptr, sched, rng);
      CHECK(test::max_abs_diff(got.image, want) < 1e-13);
    }
  }

  TEST_CASE("trajectory recording") {
    ZeroPredictor zero;
    Rng rng(1);
    const auto grid = make_timestep_grid(50, 5, 1000);
    const auto res = run_sampler({SamplerKind::DDIM, 0.0, grid}, test::scalar(0.1), zero, nullptr,
                                 sched, rng, true);
    CHECK(res.trajectory.timesteps == std::vector<int>{50, 38, 25, 13, 1, 0});
    CHECK(res.trajectory.snapshots.size() == 6);
    CHECK(res.trajectory.step_seconds.size() == 5);
    CHECK(res.trajectory.snapshots.back() == res.image);
  }

  TEST_CASE("run_sampler rejects bad grids and reports blow-ups") {
    ZeroPredictor zero;
    Rng rng(1);
    CHECK_THROWS_AS(run_sampler({SamplerKind::DDIM, 0.0, custom_grid({5, 5})}, test::scalar(0), zero,
                                nullptr, sched, rng),
                    DomainError);
    CHECK_THROWS_AS(run_sampler({SamplerKind::DDIM, 0.0, TimestepGrid{}}, test::scalar(0), zero,
                                nullptr, sched, rng),
                    DomainError);
    ConstantPredictor huge(test::scalar(1e308));
    try {
      (void)run_sampler({SamplerKind::DDIM, 0.0, custom_grid({1000, 500})}, test::scalar(0), huge,
                        nullptr, sched, rng);
      FAIL("expected throw");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("1000") != std::string::npos);
    }
  }
}
