#include "astn/denoiser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "astn/error.hpp"
#include "astn/forward.hpp"

namespace astn {

ImageBuffer EpsilonPredictor::predict(const ImageBuffer& x_t, NoiseLevel level,
                                      const ImageBuffer* cond) const {
  if (!(level.t >= 1.0) || !(level.alpha_bar > 0.0 && level.alpha_bar < 1.0)) {
    throw DomainError(name() + ": predictor evaluated at t=" + std::to_string(level.t) +
                      " (needs t >= 1)");
  }
  if (requires_condition()) {
    if (cond == nullptr) throw DomainError(name() + ": condition image required");
    require_same_shape(x_t, *cond, name());
  }
  ImageBuffer out = estimate(x_t, level, cond);
  require_same_shape(x_t, out, name());
  require_finite(out, name() + " output");
  return out;
}

ImageBuffer analytic_gaussian_epsilon(const GaussianDataModel& model, const ImageBuffer& x_t,
                                      double alpha_bar) {
  require_same_shape(model.mean, x_t, "analytic_gaussian_epsilon");
  const double sa = std::sqrt(alpha_bar);
  const double gain = std::sqrt(1.0 - alpha_bar) / (alpha_bar * model.var + 1.0 - alpha_bar);
  return axpby(gain, x_t, -gain * sa, model.mean);
}

ImageBuffer analytic_gaussian_epsilon(const GaussianDataModel& model, const ImageBuffer& x_t, int t,
                                      const NoiseSchedule& sched) {
  if (t < 1) throw DomainError("analytic_gaussian_epsilon: t must be >= 1");
  return analytic_gaussian_epsilon(model, x_t, sched.alpha_bar(t));
}

ImageBuffer ConstantPredictor::estimate(const ImageBuffer& x_t, NoiseLevel,
                                        const ImageBuffer*) const {
  require_same_shape(x_t, eps_, "ConstantPredictor");
  return eps_;
}

GaussianOraclePredictor::GaussianOraclePredictor(GaussianDataModel model)
    : model_(std::move(model)) {
  if (!(model_.var >= 0.0)) throw DomainError("GaussianDataModel: variance must be >= 0");
}

ImageBuffer GaussianOraclePredictor::estimate(const ImageBuffer& x_t, NoiseLevel level,
                                              const ImageBuffer*) const {
  return analytic_gaussian_epsilon(model_, x_t, level.alpha_bar);
}

ConditionedOraclePredictor::ConditionedOraclePredictor(GaussianDataModel prior, double noise_level)
    : prior_(std::move(prior)), noise_level_(noise_level) {
  if (!(prior_.var >= 0.0)) throw DomainError("GaussianDataModel: variance must be >= 0");
  if (!(noise_level >= 0.0)) throw DomainError("conditioned_oracle: noise_level must be >= 0");
}

GaussianDataModel ConditionedOraclePredictor::posterior(const ImageBuffer& cond) const {
  require_same_shape(prior_.mean, cond, "ConditionedOraclePredictor::posterior");
  if (std::isinf(noise_level_)) return prior_;
  const double obs_var = noise_level_ * noise_level_;
  if (obs_var == 0.0) return {cond, 0.0};
  if (prior_.var == 0.0) return prior_;
  // Precision-weighted combination of prior (m, s^2) and observation (c, n^2).
  const double denom = prior_.var + obs_var;
  return {axpby(obs_var / denom, prior_.mean, prior_.var / denom, cond),
          prior_.var * obs_var / denom};
}

ImageBuffer ConditionedOraclePredictor::estimate(const ImageBuffer& x_t, NoiseLevel level,
                                                 const ImageBuffer* cond) const {
  return analytic_gaussian_epsilon(posterior(*cond), x_t, level.alpha_bar);
}

ConditionedOraclePredictor conditioned_oracle(GaussianDataModel prior, double noise_level) {
  return ConditionedOraclePredictor(std::move(prior), noise_level);
}

AffinePredictor::AffinePredictor(int steps, std::size_t width, std::size_t height,
                                 bool conditional)
    : width_(width), height_(height), conditional_(conditional) {
  if (steps < 1) throw DomainError("AffinePredictor: need at least one timestep");
  a_.assign(static_cast<std::size_t>(steps), 1.0);
  g_.assign(static_cast<std::size_t>(steps), 0.0);
  b_.assign(static_cast<std::size_t>(steps), ImageBuffer(width, height));
}

ImageBuffer AffinePredictor::estimate(const ImageBuffer& x_t, NoiseLevel level,
                                      const ImageBuffer* cond) const {
  if (x_t.width() != width_ || x_t.height() != height_) {
    throw DomainError("AffinePredictor: trained for " + std::to_string(width_) + "x" +
                      std::to_string(height_) + " images");
  }
  if (level.t > static_cast<double>(steps())) {
    throw DomainError("AffinePredictor: trained for " + std::to_string(steps()) +
                      " timesteps, evaluated at t=" + std::to_string(level.t));
  }
  const double t = level.t;
  const auto lo = static_cast<std::size_t>(std::floor(t)) - 1;
  const std::size_t hi = std::min(lo + 1, a_.size() - 1);
  const double w = t - std::floor(t);

  const double a = (1.0 - w) * a_[lo] + w * a_[hi];
  const double g = (1.0 - w) * g_[lo] + w * g_[hi];
  auto blo = b_[lo].values();
  auto bhi = b_[hi].values();
  auto x = x_t.values();

  ImageBuffer out(width_, height_);
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = a * x[i] + (1.0 - w) * blo[i] + w * bhi[i];
  }
  if (conditional_) {
    auto c = cond->values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += g * c[i];
  }
  return out;
}

std::uint64_t image_checksum(const ImageBuffer& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : img.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& tok, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ConfigError(where + ": bad number '" + tok + "'");
  return v;
}

}  // namespace

void AffinePredictor::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "ASTAFFINE1 " << steps() << ' ' << width_ << ' ' << height_ << ' '
      << (conditional_ ? 1 : 0) << '\n';
  for (int t = 1; t <= steps(); ++t) {
    out << t << ' ' << hexfloat(a(t)) << ' ' << hexfloat(g(t)) << ' ' << image_checksum(b(t));
    for (double v : b(t).values()) out << ' ' << hexfloat(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

AffinePredictor AffinePredictor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open affine predictor file " + path.string());
  std::string magic;
  int steps = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  int conditional = 0;
  in >> magic >> steps >> width >> height >> conditional;
  if (!in || magic != "ASTAFFINE1" || steps < 1 || width == 0 || height == 0) {
    throw ConfigError(path.string() + ": not an ASTAFFINE1 file");
  }
  AffinePredictor p(steps, width, height, conditional != 0);
  std::string line;
  std::getline(in, line);
  for (int t = 1; t <= steps; ++t) {
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": truncated at t=" + std::to_string(t));
    std::istringstream ls(line);
    int tt = 0;
    std::string a_tok;
    std::string g_tok;
    std::uint64_t checksum = 0;
    ls >> tt >> a_tok >> g_tok >> checksum;
    if (!ls || tt != t) throw ConfigError(path.string() + ": bad line for t=" + std::to_string(t));
    const std::string where = path.string() + " t=" + std::to_string(t);
    p.a(t) = parse_hexfloat(a_tok, where);
    p.g(t) = parse_hexfloat(g_tok, where);
    std::vector<double> b;
    b.reserve(width * height);
    std::string tok;
    while (ls >> tok) b.push_back(parse_hexfloat(tok, where));
    if (b.size() != width * height) throw ConfigError(where + ": wrong number of offsets");
    p.b(t) = ImageBuffer(width, height, std::move(b));
    if (image_checksum(p.b(t)) != checksum) throw ConfigError(where + ": offset checksum mismatch");
  }
  return p;
}

namespace {

struct AffineGrad {
  double a = 0.0;
  double g = 0.0;
  std::vector<double> b;
};

}  // namespace

TrainingResult train_affine_predictor(const TrainingData& data, ConditionMode mode,
                                      const NoiseSchedule& sched, const SgdConfig& sgd, Rng& rng) {
  if (sgd.iterations < 1) throw DomainError("train_affine_predictor: iterations must be >= 1");
  if (!(sgd.lr >= 0.0)) throw DomainError("train_affine_predictor: lr must be >= 0");
  if (sgd.batch < 1) throw DomainError("train_affine_predictor: batch must be >= 1");
  if (!data.from_model && data.samples.empty()) {
    throw DomainError("train_affine_predictor: empty sample set");
  }
  const ImageBuffer& shape = data.from_model ? data.model.mean : data.samples.front();
  const std::size_t w = shape.width();
  const std::size_t h = shape.height();
  const std::size_t n = w * h;
  const bool conditional = mode == ConditionMode::Concat;

  AffinePredictor pred(sched.steps(), w, h, conditional);
  const long long epoch_iters =
      sgd.epoch_iterations > 0 ? sgd.epoch_iterations : std::max(1LL, sgd.iterations / 10);
  const double decay = std::clamp(sgd.decay_fraction, 0.0, 1.0);
  const auto decay_start = static_cast<long long>(static_cast<double>(sgd.iterations) * (1.0 - decay));
  const double sd = std::sqrt(data.from_model ? data.model.var : 0.0);

  auto draw_x0 = [&]() {
    if (!data.from_model) {
      const auto k = rng.uniform_int(0, static_cast<long long>(data.samples.size()) - 1);
      return data.samples[static_cast<std::size_t>(k)];
    }
    ImageBuffer x0 = data.model.mean;
    for (double& v : x0.values()) v += sd * rng.normal();
    return x0;
  };

  TrainingResult result{pred, {}};
  AffinePredictor& p = result.predictor;
  double initial_loss = -1.0;
  double epoch_loss = 0.0;
  long long epoch_items = 0;
  std::map<int, AffineGrad> grads;

  for (long long it = 0; it < sgd.iterations; ++it) {
    double lr = sgd.lr;
    if (it >= decay_start && sgd.iterations > decay_start) {
      lr *= static_cast<double>(sgd.iterations - it) /
            static_cast<double>(sgd.iterations - decay_start);
    }
    grads.clear();
    double batch_loss = 0.0;
    for (int item = 0; item < sgd.batch; ++item) {
      const ImageBuffer x0 = draw_x0();
      ImageBuffer c;
      if (conditional) {
        c = x0;
        for (double& v : c.values()) v += data.cond_noise * rng.normal();
      }
      const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
      const ImageBuffer eps = rng.normal_image(w, h);
      const ImageBuffer x_t = q_sample(x0, t, eps, sched);

      const double a = p.a(t);
      const double gc = p.g(t);
      auto bt = p.b(t).values();
      auto xv = x_t.values();
      auto ev = eps.values();
      AffineGrad& gr = grads[t];
      if (gr.b.empty()) gr.b.assign(n, 0.0);
      double sq = 0.0;
      double ga = 0.0;
      double gg = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double r = a * xv[i] + bt[i] - ev[i];
        if (conditional) r += gc * c[i];
        sq += r * r;
        ga += r * xv[i];
        if (conditional) gg += r * c[i];
        gr.b[i] += 2.0 * r;
      }
      const double nn = static_cast<double>(n);
      gr.a += 2.0 * ga / nn;
      gr.g += 2.0 * gg / nn;
      batch_loss += sq / nn;
    }
    batch_loss /= sgd.batch;
    if (initial_loss < 0.0) initial_loss = batch_loss;

    for (auto& [t, gr] : grads) {
      p.a(t) -= lr * gr.a;
      if (conditional) p.g(t) -= lr * gr.g;
      auto bt = p.b(t).values();
      for (std::size_t i = 0; i < n; ++i) bt[i] -= lr * gr.b[i];
    }

    epoch_loss += batch_loss;
    ++epoch_items;
    if (!std::isfinite(batch_loss) || (epoch_items == epoch_iters || it + 1 == sgd.iterations)) {
      const double mean_loss = epoch_loss / static_cast<double>(epoch_items);
      if (!std::isfinite(mean_loss) || mean_loss > 10.0 * initial_loss) {
        throw NumericalError("train_affine_predictor: diverged at iteration " +
                             std::to_string(it + 1) + " (epoch loss " + std::to_string(mean_loss) +
                             ", initial " + std::to_string(initial_loss) + ", lr " +
                             std::to_string(sgd.lr) + ")");
      }
      result.epoch_losses.push_back(mean_loss);
      epoch_loss = 0.0;
      epoch_items = 0;
    }
  }
  return result;
}

}  // namespace astn
