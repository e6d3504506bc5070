#include "astn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "astn/error.hpp"

namespace astn {

double rmse(const ImageBuffer& ref, const ImageBuffer& test) {
  return std::sqrt(mean_squared_difference(ref, test));
}

double psnr(const ImageBuffer& ref, const ImageBuffer& test, double data_range) {
  if (!(data_range > 0.0)) throw DomainError("psnr: data_range must be positive");
  const double mse = mean_squared_difference(ref, test);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

std::vector<double> gaussian_taps(int window, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(window));
  const double center = 0.5 * (window - 1);
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - center;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (double& v : taps) v /= sum;
  return taps;
}

namespace {

/// Separable 'valid' filtering: output is (w - k + 1) x (h - k + 1).
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t w, std::size_t h,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t ow = w - k + 1;
  const std::size_t oh = h - k + 1;
  std::vector<double> rows(ow * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * img[y * w + x + i];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageBuffer& ref, const ImageBuffer& test, const SsimParams& params) {
  require_same_shape(ref, test, "ssim");
  if (params.window < 1 || !(params.sigma > 0.0) || !(params.data_range > 0.0)) {
    throw DomainError("ssim: invalid parameters");
  }
  const auto win = static_cast<std::size_t>(params.window);
  const std::size_t w = ref.width();
  const std::size_t h = ref.height();
  if (w < win || h < win) {
    throw DomainError("ssim: image " + std::to_string(w) + "x" + std::to_string(h) +
                      " smaller than the " + std::to_string(win) + "-pixel window");
  }
  const auto taps = gaussian_taps(params.window, params.sigma);
  const std::size_t n = w * h;
  std::vector<double> a(ref.values().begin(), ref.values().end());
  std::vector<double> b(test.values().begin(), test.values().end());
  std::vector<double> aa(n);
  std::vector<double> bb(n);
  std::vector<double> ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, w, h, taps);
  const auto mu_b = filter_valid(b, w, h, taps);
  const auto e_aa = filter_valid(aa, w, h, taps);
  const auto e_bb = filter_valid(bb, w, h, taps);
  const auto e_ab = filter_valid(ab, w, h, taps);

  const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
  const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

void MetricsReport::write_csv(std::ostream& out) const {
  out << "# time_s is mean wall-clock seconds per image\n" << kHeader << '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%llu", r.regime.c_str(),
                  r.sampler.c_str(), r.steps, r.psnr_db, r.rmse, r.ssim, r.time_s,
                  static_cast<unsigned long long>(r.seed));
    out << buf << '\n';
  }
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(out);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, const char* field) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw ConfigError("metrics CSV line " + std::to_string(line) + ": bad " + field + " '" + s + "'");
  }
  return v;
}

}  // namespace

MetricsReport MetricsReport::read_csv(std::istream& in) {
  MetricsReport report;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kHeader) {
        throw ConfigError("metrics CSV line " + std::to_string(lineno) + ": expected header '" +
                          kHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 8) {
      throw ConfigError("metrics CSV line " + std::to_string(lineno) + ": expected 8 fields, got " +
                        std::to_string(f.size()));
    }
    MetricsRow r;
    r.regime = f[0];
    r.sampler = f[1];
    const double steps = parse_double(f[2], lineno, "steps");
    if (steps != std::floor(steps) || steps < 0) {
      throw ConfigError("metrics CSV line " + std::to_string(lineno) + ": bad steps '" + f[2] + "'");
    }
    r.steps = static_cast<int>(steps);
    r.psnr_db = parse_double(f[3], lineno, "psnr_db");
    r.rmse = parse_double(f[4], lineno, "rmse");
    r.ssim = parse_double(f[5], lineno, "ssim");
    r.time_s = parse_double(f[6], lineno, "time_s");
    char* end = nullptr;
    r.seed = std::strtoull(f[7].c_str(), &end, 10);
    if (f[7].empty() || *end != '\0') {
      throw ConfigError("metrics CSV line " + std::to_string(lineno) + ": bad seed '" + f[7] + "'");
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

MetricsReport MetricsReport::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics CSV " + path.string());
  return read_csv(in);
}

}  // namespace astn
