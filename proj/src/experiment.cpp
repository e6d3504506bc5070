#include "astn/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include "astn/error.hpp"

namespace astn {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(value);
  while (std::getline(ss, cur, ',')) {
    auto t = trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
  return out;
}

// Shortest representation that parses back to the same double.
std::string fmt_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += f(xs[i]);
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  if (c.count < 0) throw ConfigError("config: count must be >= 0");
  if (c.size < 32) throw ConfigError("config: size must be >= 32");
  if (c.n_ellipses < 0) throw ConfigError("config: n_ellipses must be >= 0");
  for (double d : c.doses) {
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("config: dose fractions must lie in (0, 1]");
  }
  if (!(c.photon_budget > 0.0)) throw ConfigError("config: photon_budget must be > 0");
  if (c.steps < 1) throw ConfigError("config: T must be >= 1");
  if (!(c.beta_start > 0.0 && c.beta_start <= c.beta_end && c.beta_end < 1.0)) {
    throw ConfigError("config: need 0 < beta_start <= beta_end < 1");
  }
  for (int b : c.budgets) {
    if (b < 1 || b > c.steps) {
      throw ConfigError("config: budget " + std::to_string(b) + " outside [1, T]");
    }
  }
  if (c.eta < 0.0) throw ConfigError("config: eta must be >= 0");
  if (c.max_images < 0) throw ConfigError("config: max_images must be >= 0");
  if (c.threads < 1) throw ConfigError("config: threads must be >= 1");
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    if (key == "count") c.count = parse_int<int>(key, v);
    else if (key == "size") c.size = parse_int<int>(key, v);
    else if (key == "n_ellipses") c.n_ellipses = parse_int<int>(key, v);
    else if (key == "doses") {
      c.doses.clear();
      for (const auto& tok : split_list(v)) c.doses.push_back(parse_real(key, tok));
    } else if (key == "photon_budget") c.photon_budget = parse_real(key, v);
    else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, v);
    else if (key == "T") c.steps = parse_int<int>(key, v);
    else if (key == "beta_start") c.beta_start = parse_real(key, v);
    else if (key == "beta_end") c.beta_end = parse_real(key, v);
    else if (key == "dataset") c.dataset = v;
    else if (key == "predictor") c.predictor = v;
    else if (key == "samplers") {
      c.samplers.clear();
      for (const auto& tok : split_list(v)) c.samplers.push_back(parse_sampler_kind(tok));
    } else if (key == "regimes") {
      c.regimes.clear();
      for (const auto& tok : split_list(v)) c.regimes.push_back(parse_regime_token(tok));
    } else if (key == "budgets") {
      c.budgets.clear();
      for (const auto& tok : split_list(v)) c.budgets.push_back(parse_int<int>(key, tok));
    } else if (key == "eta") c.eta = parse_real(key, v);
    else if (key == "inversion_mode") c.inversion_mode = parse_inversion_mode(v);
    else if (key == "max_images") c.max_images = parse_int<int>(key, v);
    else if (key == "threads") c.threads = parse_int<int>(key, v);
    else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "# dataset\n"
      << "count = " << c.count << '\n'
      << "size = " << c.size << '\n'
      << "n_ellipses = " << c.n_ellipses << '\n'
      << "doses = " << join(c.doses, fmt_real) << '\n'
      << "photon_budget = " << fmt_real(c.photon_budget) << '\n'
      << "seed = " << c.seed << '\n'
      << "# schedule\n"
      << "T = " << c.steps << '\n'
      << "beta_start = " << fmt_real(c.beta_start) << '\n'
      << "beta_end = " << fmt_real(c.beta_end) << '\n'
      << "# run\n"
      << "dataset = " << c.dataset << '\n'
      << "predictor = " << c.predictor << '\n'
      << "samplers = "
      << join(c.samplers, [](SamplerKind k) { return std::string(sampler_token(k)); }) << '\n'
      << "regimes = "
      << join(c.regimes, [](RegimeToken t) { return std::string(regime_token(t)); }) << '\n'
      << "budgets = " << join(c.budgets, [](int b) { return std::to_string(b); }) << '\n'
      << "eta = " << fmt_real(c.eta) << '\n'
      << "inversion_mode = " << inversion_mode_token(c.inversion_mode) << '\n'
      << "max_images = " << c.max_images << '\n'
      << "threads = " << c.threads << '\n';
  return out.str();
}

NoiseSchedule make_schedule(const ExperimentConfig& cfg) {
  return make_linear_schedule(cfg.steps, cfg.beta_start, cfg.beta_end);
}

std::vector<ManifestEntry> cmd_generate(const ExperimentConfig& cfg, const fs::path& out_dir,
                                        bool force) {
  const fs::path manifest = out_dir / "manifest.csv";
  if (fs::exists(manifest) && !force) {
    throw std::runtime_error(manifest.string() + " exists; pass --force to overwrite");
  }
  fs::create_directories(out_dir / "images");

  std::vector<ManifestEntry> entries;
  char name[64];
  for (int i = 0; i < cfg.count; ++i) {
    PhantomSpec spec;
    spec.size = cfg.size;
    spec.n_ellipses = cfg.n_ellipses;
    spec.seed = derive_seed(cfg.seed, {0, static_cast<std::uint64_t>(i)});
    const ImageBuffer full = generate_phantom(spec);
    std::snprintf(name, sizeof name, "images/phantom_%04d", i);
    const std::string full_rel = std::string(name) + ".astimg";
    write_image(out_dir / full_rel, full);
    write_pgm(out_dir / (std::string(name) + ".pgm"), full);

    for (std::size_t j = 0; j < cfg.doses.size(); ++j) {
      const std::uint64_t seed =
          derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      Rng rng(seed);
      const ImageBuffer low = simulate_low_dose(full, cfg.doses[j], rng, cfg.photon_budget);
      std::snprintf(name, sizeof name, "images/phantom_%04d_low%zu", i, j);
      const std::string low_rel = std::string(name) + ".astimg";
      write_image(out_dir / low_rel, low);
      write_pgm(out_dir / (std::string(name) + ".pgm"), low);

      std::snprintf(name, sizeof name, "p%04d_d%zu", i, j);
      entries.push_back({name, full_rel, low_rel, cfg.doses[j], seed});
    }
  }
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  write_manifest(out, entries);
  return entries;
}

std::vector<DosePair> load_dataset(const fs::path& dir, int max_images) {
  const fs::path manifest = dir / "manifest.csv";
  std::ifstream in(manifest);
  if (!in) throw ConfigError("dataset manifest not found: " + manifest.string());
  auto entries = read_manifest(in);
  if (max_images > 0 && entries.size() > static_cast<std::size_t>(max_images)) {
    entries.resize(static_cast<std::size_t>(max_images));
  }
  std::vector<DosePair> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) {
    pairs.push_back({read_image(dir / e.full_path), read_image(dir / e.low_path), e.dose_fraction});
    require_same_shape(pairs.back().full_dose, pairs.back().low_dose, "load_dataset " + e.pair_id);
  }
  return pairs;
}

DatasetStatistics dataset_statistics(const std::vector<DosePair>& pairs) {
  if (pairs.empty()) throw DomainError("dataset_statistics: empty dataset");
  double sum = 0.0;
  double sum_sq = 0.0;
  double resid = 0.0;
  double count = 0.0;
  for (const auto& p : pairs) {
    for (double v : p.full_dose.values()) {
      sum += v;
      sum_sq += v * v;
    }
    count += static_cast<double>(p.full_dose.size());
    resid += mean_squared_difference(p.low_dose, p.full_dose);
  }
  const double mean = sum / count;
  const double var = std::max(0.0, sum_sq / count - mean * mean);
  const auto& shape = pairs.front().full_dose;
  return {{ImageBuffer(shape.width(), shape.height(), mean), var},
          std::sqrt(resid / static_cast<double>(pairs.size()))};
}

std::unique_ptr<EpsilonPredictor> make_predictor(const std::string& spec,
                                                 const std::vector<DosePair>& pairs) {
  if (spec == "zero") return std::make_unique<ZeroPredictor>();
  if (spec.rfind("affine:", 0) == 0) {
    return std::make_unique<AffinePredictor>(AffinePredictor::load(spec.substr(7)));
  }
  if (spec == "oracle" || spec == "conditioned-oracle") {
    const auto stats = dataset_statistics(pairs);
    if (spec == "oracle") return std::make_unique<GaussianOraclePredictor>(stats.prior);
    return std::make_unique<ConditionedOraclePredictor>(stats.prior, stats.noise_level);
  }
  throw ConfigError("unknown predictor '" + spec + "'");
}

std::vector<fs::path> write_curves(const MetricsReport& report, const fs::path& dir) {
  std::map<std::pair<std::string, std::string>, std::vector<const MetricsRow*>> groups;
  for (const auto& r : report.rows) groups[{r.sampler, r.regime}].push_back(&r);
  std::vector<fs::path> files;
  if (groups.empty()) return files;
  fs::create_directories(dir);
  for (auto& [key, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const MetricsRow* a, const MetricsRow* b) { return a->steps < b->steps; });
    const fs::path path = dir / (key.first + "_" + key.second + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "steps,psnr_db,ssim,rmse,time_s\n";
    char buf[256];
    for (const auto* r : rows) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g", r->steps, r->psnr_db, r->ssim,
                    r->rmse, r->time_s);
      out << buf << '\n';
    }
    files.push_back(path);
  }
  return files;
}

RunOutputs cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto pairs = load_dataset(cfg.dataset, cfg.max_images);
  if (pairs.empty()) throw ConfigError("dataset " + cfg.dataset + " has no pairs");
  const auto sched = make_schedule(cfg);
  const auto pred = make_predictor(cfg.predictor, pairs);

  SweepConfig sweep;
  sweep.regimes = cfg.regimes;
  sweep.samplers = cfg.samplers;
  sweep.budgets = cfg.budgets;
  sweep.eta = cfg.eta;
  sweep.inversion_mode = cfg.inversion_mode;
  sweep.seed = cfg.seed;
  sweep.threads = cfg.threads;

  RunOutputs out;
  out.sweep = regime_sweep(sweep, pairs, *pred, sched);
  fs::create_directories(out_dir);
  out.metrics_csv = out_dir / "metrics.csv";
  out.sweep.report.write_csv(out.metrics_csv);
  out.curve_files = write_curves(out.sweep.report, out_dir / "curves");
  return out;
}

namespace {

int sampler_rank(const std::string& token) {
  static const std::vector<std::string> order{"ddpm", "ddim", "dpm1", "dpm2", "dpmpp", "unipc"};
  const auto it = std::find(order.begin(), order.end(), token);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

std::string display_name(const std::string& token) {
  if (token == "ddpm") return "DDPM";
  if (token == "ddim") return "DDIM";
  if (token == "dpm1") return "Solver-1";
  if (token == "dpm2") return "Solver-2";
  if (token == "dpmpp") return "Solver++";
  if (token == "unipc") return "UniPC";
  return token;
}

struct Cell {
  const MetricsRow* inverted = nullptr;
  const MetricsRow* standard = nullptr;
};

std::string format_pair(const Cell& cell, double MetricsRow::*field, const char* fmt) {
  char a[64];
  char b[64];
  if (cell.inverted && cell.standard) {
    std::snprintf(a, sizeof a, fmt, cell.inverted->*field);
    std::snprintf(b, sizeof b, fmt, cell.standard->*field);
    return std::string(a) + "/" + b;
  }
  if (cell.standard) {
    std::snprintf(b, sizeof b, fmt, cell.standard->*field);
    return b;
  }
  std::snprintf(a, sizeof a, fmt, cell.inverted->*field);
  return std::string(a) + "/-";
}

}  // namespace

std::string render_report(const MetricsReport& report, int total_steps) {
  // Block 0: full schedule, 1: reduced steps, 2: AST, 3: anything else.
  using Key = std::tuple<int, int, std::string, int, std::string>;
  std::map<Key, Cell> cells;
  for (const auto& r : report.rows) {
    int block = 3;
    bool inverted = false;
    std::string label;
    if (r.regime == "full" || r.regime == "inverted-full") {
      block = r.steps == total_steps ? 0 : 1;
      inverted = r.regime == "inverted-full";
    } else if (r.regime == "ast" || r.regime == "inverted") {
      block = 2;
      inverted = r.regime == "inverted";
    } else {
      label = r.regime;
    }
    Cell& c = cells[{block, sampler_rank(r.sampler), r.sampler, -r.steps, label}];
    (inverted ? c.inverted : c.standard) = &r;
  }

  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-21s %-21s %-21s %-21s", "Model", "PSNR (dB)", "RMSE",
                "SSIM", "Time (s)");
  std::string header = line;
  header.erase(header.find_last_not_of(' ') + 1);
  const std::string rule(header.size(), '-');
  out << header << '\n' << rule << '\n';
  static const char* block_titles[] = {"Full schedule", "Reduced steps", "AST-n", "Other"};
  int current = -1;
  for (const auto& [key, cell] : cells) {
    const auto& [block, rank, sampler, neg_steps, label] = key;
    if (block != current) {
      if (current != -1) out << rule << '\n';
      out << "[" << block_titles[block] << "]\n";
      current = block;
    }
    const int steps = -neg_steps;
    std::string model;
    if (block == 2) {
      model = display_name(sampler) + " (AST-" + std::to_string(steps) + ")";
    } else if (block == 3) {
      model = display_name(sampler) + "@" + std::to_string(steps) + " " + label;
    } else {
      model = display_name(sampler) + "@" + std::to_string(steps);
    }
    std::snprintf(line, sizeof line, "%-22s %-21s %-21s %-21s %-21s", model.c_str(),
                  format_pair(cell, &MetricsRow::psnr_db, "%.3f").c_str(),
                  format_pair(cell, &MetricsRow::rmse, "%.4f").c_str(),
                  format_pair(cell, &MetricsRow::ssim, "%.3f").c_str(),
                  format_pair(cell, &MetricsRow::time_s, "%.4f").c_str());
    std::string s = line;
    s.erase(s.find_last_not_of(' ') + 1);
    out << s << '\n';
  }
  return out.str();
}

}  // namespace astn
