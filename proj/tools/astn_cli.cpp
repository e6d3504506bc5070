#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "astn/error.hpp"
#include "astn/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool force = false;
  int threads = 0;
  std::string metrics;
};

astn::ExperimentConfig resolve_config(const Options& opt) {
  astn::ExperimentConfig cfg = opt.config.empty() ? astn::ExperimentConfig{}
                                                  : astn::load_config(opt.config);
  if (opt.seed_given) cfg.seed = opt.seed;
  if (opt.threads > 0) cfg.threads = opt.threads;
  return cfg;
}

int run_generate(const Options& opt) {
  const auto cfg = resolve_config(opt);
  const auto entries = astn::cmd_generate(cfg, opt.out, opt.force);
  std::cout << "wrote " << entries.size() << " pairs to " << (fs::path(opt.out) / "manifest.csv")
            << '\n';
  return 0;
}

int run_sweep(const Options& opt) {
  const auto cfg = resolve_config(opt);
  const auto out = astn::cmd_run(cfg, opt.out);
  std::cout << "wrote " << out.sweep.report.rows.size() << " rows to " << out.metrics_csv << '\n';
  for (const auto& f : out.sweep.failures) std::cerr << "failed: " << f << '\n';
  return out.sweep.failures.empty() ? 0 : kExitRuntime;
}

int run_report(const Options& opt) {
  const auto cfg = resolve_config(opt);
  const auto report = astn::MetricsReport::read_csv(fs::path(opt.metrics));
  const std::string table = astn::render_report(report, cfg.steps);
  std::cout << table;
  fs::create_directories(opt.out);
  const fs::path path = fs::path(opt.out) / "report.txt";
  std::ofstream(path) << table;
  astn::write_curves(report, fs::path(opt.out) / "curves");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AST-n diffusion sampling experiments"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "override the master seed")
        ->each([&](const std::string&) { opt.seed_given = true; });
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("generate", "write synthetic phantom pairs and a manifest");
  add_common(gen);
  gen->add_flag("--force", opt.force, "overwrite an existing dataset");

  auto* run = app.add_subcommand("run", "run the regime sweep and write metrics.csv");
  add_common(run);

  auto* rep = app.add_subcommand("report", "render a metrics CSV as a table plus curves");
  add_common(rep);
  rep->add_option("metrics", opt.metrics, "metrics CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return run_generate(opt);
    if (*run) return run_sweep(opt);
    return run_report(opt);
  } catch (const astn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
