#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <memory>
#include <optional>

#include "astn/astn.hpp"
#include "astn/error.hpp"
#include "astn/experiment.hpp"
#include "astn/forward.hpp"

namespace py = pybind11;
using namespace astn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageBuffer to_image(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2D array (height, width)");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + w * h);
  return ImageBuffer(w, h, std::move(data));
}

Array to_array(const ImageBuffer& img) {
  Array out({img.height(), img.width()});
  std::memcpy(out.mutable_data(), img.values().data(), img.size() * sizeof(double));
  return out;
}

std::optional<ImageBuffer> maybe_image(const std::optional<Array>& a) {
  if (!a) return std::nullopt;
  return to_image(*a);
}

TimestepGrid grid_from(const std::vector<int>& steps) {
  if (steps.empty()) throw py::value_error("empty timestep grid");
  TimestepGrid g;
  g.steps = steps;
  g.origin = steps.front();
  return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AST-n diffusion sampling core";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<std::vector<double>>(), py::arg("betas"))
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def_property_readonly("alpha_bars",
                             [](const NoiseSchedule& s) {
                               auto ab = s.alpha_bars();
                               return py::array_t<double>(static_cast<py::ssize_t>(ab.size()), ab.data());
                             })
      .def("alpha_bar", &NoiseSchedule::alpha_bar, py::arg("t"))
      .def("alpha_bar_at", &NoiseSchedule::alpha_bar_at, py::arg("t"))
      .def("log_snr", &NoiseSchedule::log_snr, py::arg("t"))
      .def("timestep_for_log_snr", &NoiseSchedule::timestep_for_log_snr, py::arg("log_snr"));

  m.def("linear_schedule", &make_linear_schedule, py::arg("steps") = kDefaultSteps,
        py::arg("beta_start") = kDefaultBetaStart, py::arg("beta_end") = kDefaultBetaEnd);
  m.def(
      "timestep_grid",
      [](int origin, int count, int total_steps) {
        return make_timestep_grid(origin, count, total_steps).steps;
      },
      py::arg("origin"), py::arg("count"), py::arg("total_steps") = kDefaultSteps);

  m.def(
      "q_sample",
      [](const Array& x0, int t, const Array& eps, const NoiseSchedule& s) {
        return to_array(q_sample(to_image(x0), t, to_image(eps), s));
      },
      py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));

  py::class_<EpsilonPredictor, std::shared_ptr<EpsilonPredictor>>(m, "Predictor")
      .def_property_readonly("name", &EpsilonPredictor::name)
      .def_property_readonly("requires_condition", &EpsilonPredictor::requires_condition)
      .def(
          "predict",
          [](const EpsilonPredictor& p, const Array& x, int t, const NoiseSchedule& s,
             const std::optional<Array>& cond) {
            const auto c = maybe_image(cond);
            return to_array(p.predict(to_image(x), t, c ? &*c : nullptr, s));
          },
          py::arg("x_t"), py::arg("t"), py::arg("schedule"), py::arg("cond") = py::none());

  m.def(
      "zero_predictor", []() -> std::shared_ptr<EpsilonPredictor> { return std::make_shared<ZeroPredictor>(); });
  m.def(
      "gaussian_oracle",
      [](const Array& mean, double var) -> std::shared_ptr<EpsilonPredictor> {
        return std::make_shared<GaussianOraclePredictor>(GaussianDataModel{to_image(mean), var});
      },
      py::arg("mean"), py::arg("var"));
  m.def(
      "conditioned_oracle",
      [](const Array& mean, double var, double noise_level) -> std::shared_ptr<EpsilonPredictor> {
        return std::make_shared<ConditionedOraclePredictor>(GaussianDataModel{to_image(mean), var},
                                                            noise_level);
      },
      py::arg("prior_mean"), py::arg("prior_var"), py::arg("noise_level"));
  m.def(
      "load_affine_predictor",
      [](const std::filesystem::path& path) -> std::shared_ptr<EpsilonPredictor> {
        return std::make_shared<AffinePredictor>(AffinePredictor::load(path));
      },
      py::arg("path"));

  m.def(
      "sample",
      [](const std::string& sampler, const Array& x_init, const EpsilonPredictor& pred,
         const NoiseSchedule& s, const std::vector<int>& steps, double eta, std::uint64_t seed,
         const std::optional<Array>& cond) {
        const auto c = maybe_image(cond);
        Rng rng(seed);
        const SamplerSpec spec{parse_sampler_kind(sampler), eta, grid_from(steps)};
        return to_array(run_sampler(spec, to_image(x_init), pred, c ? &*c : nullptr, s, rng).image);
      },
      py::arg("sampler"), py::arg("x_init"), py::arg("predictor"), py::arg("schedule"),
      py::arg("steps"), py::arg("eta") = 0.0, py::arg("seed") = 0, py::arg("cond") = py::none());

  m.def(
      "ddim_invert",
      [](const Array& x, const EpsilonPredictor& pred, const NoiseSchedule& s,
         const std::vector<int>& steps, const std::string& mode, const std::optional<Array>& cond) {
        const auto c = maybe_image(cond);
        return to_array(ddim_invert(to_image(x), pred, c ? &*c : nullptr, s, grid_from(steps),
                                    parse_inversion_mode(mode)));
      },
      py::arg("x"), py::arg("predictor"), py::arg("schedule"), py::arg("steps"),
      py::arg("mode") = "predicted_x0", py::arg("cond") = py::none());

  m.def(
      "reconstruct",
      [](const Array& low_dose, const EpsilonPredictor& pred, const NoiseSchedule& s,
         const std::string& regime, int budget, const std::string& sampler, double eta,
         std::uint64_t seed) {
        SweepConfig cfg;
        cfg.eta = eta;
        const auto spec = make_regime(parse_regime_token(regime), parse_sampler_kind(sampler), budget, cfg);
        Rng rng(seed);
        return to_array(reconstruct(spec, to_image(low_dose), pred, s, rng).image);
      },
      py::arg("low_dose"), py::arg("predictor"), py::arg("schedule"), py::arg("regime") = "ast",
      py::arg("budget") = 150, py::arg("sampler") = "ddim", py::arg("eta") = 0.0, py::arg("seed") = 0);

  m.def(
      "psnr", [](const Array& a, const Array& b, double range) { return psnr(to_image(a), to_image(b), range); },
      py::arg("reference"), py::arg("test"), py::arg("data_range") = 1.0);
  m.def(
      "rmse", [](const Array& a, const Array& b) { return rmse(to_image(a), to_image(b)); },
      py::arg("reference"), py::arg("test"));
  m.def(
      "ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); },
      py::arg("reference"), py::arg("test"));

  m.def(
      "phantom",
      [](int size, int n_ellipses, std::uint64_t seed) {
        PhantomSpec spec;
        spec.size = size;
        spec.n_ellipses = n_ellipses;
        spec.seed = seed;
        return to_array(generate_phantom(spec));
      },
      py::arg("size") = 64, py::arg("n_ellipses") = 5, py::arg("seed") = 0);
  m.def(
      "simulate_low_dose",
      [](const Array& x0, double dose, std::uint64_t seed, double budget) {
        Rng rng(seed);
        return to_array(simulate_low_dose(to_image(x0), dose, rng, budget));
      },
      py::arg("x0"), py::arg("dose_fraction"), py::arg("seed") = 0,
      py::arg("photon_budget") = kDefaultPhotonBudget);

  m.def(
      "write_image", [](const std::filesystem::path& p, const Array& a) { write_image(p, to_image(a)); },
      py::arg("path"), py::arg("image"));
  m.def(
      "read_image", [](const std::filesystem::path& p) { return to_array(read_image(p)); }, py::arg("path"));

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& config, const std::filesystem::path& out, bool force) {
        return cmd_generate(load_config(config), out, force).size();
      },
      py::arg("config"), py::arg("out"), py::arg("force") = false);
  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, const std::filesystem::path& out) {
        const auto res = cmd_run(load_config(config), out);
        return py::make_tuple(res.metrics_csv, res.sweep.failures);
      },
      py::arg("config"), py::arg("out"));
}
