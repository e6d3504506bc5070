#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "astn/astn.hpp"
#include "astn/data.hpp"
#include "astn/denoiser.hpp"
#include "astn/metrics.hpp"
#include "astn/schedule.hpp"

namespace astn {

/// Experiment configuration. On disk it is a flat "key = value" file; '#'
/// starts a comment and list values are comma-separated. See
/// configs/default.conf for every key.
struct ExperimentConfig {
  // dataset
  int count = 16;
  int size = 64;
  int n_ellipses = 5;
  std::vector<double> doses{0.25, 0.10};
  double photon_budget = kDefaultPhotonBudget;
  std::uint64_t seed = 42;
  // schedule
  int steps = kDefaultSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  // run
  std::string dataset = "data";
  /// conditioned-oracle | oracle | zero | affine:<path>
  std::string predictor = "conditioned-oracle";
  std::vector<SamplerKind> samplers{SamplerKind::DDPM,  SamplerKind::DDIM,    SamplerKind::DPM1,
                                    SamplerKind::DPM2,  SamplerKind::DPMpp2M, SamplerKind::UniPC2};
  std::vector<RegimeToken> regimes{RegimeToken::Full, RegimeToken::Ast, RegimeToken::Inverted};
  std::vector<int> budgets{10, 25, 50, 100, 150, 500, 1000};
  double eta = 0.0;
  InversionMode inversion_mode = InversionMode::PredictedX0;
  /// 0 uses every manifest entry.
  int max_images = 0;
  int threads = 1;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

NoiseSchedule make_schedule(const ExperimentConfig& cfg);

/// Writes images/ and manifest.csv under `out_dir`. Throws
/// std::runtime_error if a manifest already exists and `force` is false.
std::vector<ManifestEntry> cmd_generate(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir, bool force);

/// Loads the pairs listed in `<dir>/manifest.csv` (paths relative to dir).
std::vector<DosePair> load_dataset(const std::filesystem::path& dir, int max_images = 0);

/// Global mean/variance prior over the full-dose images and the pooled
/// low-dose residual standard deviation.
struct DatasetStatistics {
  GaussianDataModel prior;
  double noise_level = 0.0;
};
DatasetStatistics dataset_statistics(const std::vector<DosePair>& pairs);

std::unique_ptr<EpsilonPredictor> make_predictor(const std::string& spec,
                                                 const std::vector<DosePair>& pairs);

struct RunOutputs {
  SweepResult sweep;
  std::filesystem::path metrics_csv;
  std::vector<std::filesystem::path> curve_files;
};

/// Runs the configured sweep on `cfg.dataset` and writes metrics.csv and
/// curves/<sampler>_<regime>.csv under `out_dir`.
RunOutputs cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Writes one steps->metrics curve per (sampler, regime) present in the report.
std::vector<std::filesystem::path> write_curves(const MetricsReport& report,
                                                const std::filesystem::path& dir);

/// Table-1 style text: full-schedule, reduced-step and AST blocks; cells are
/// "inverted/standard" when both regimes exist for the same sampler and
/// budget.
std::string render_report(const MetricsReport& report, int total_steps = kDefaultSteps);

}  // namespace astn
