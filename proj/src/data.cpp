#include "astn/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "astn/error.hpp"

namespace astn {

ImageBuffer generate_phantom(const PhantomSpec& spec) {
  if (spec.size < 32) throw DomainError("generate_phantom: size must be >= 32");
  if (spec.n_ellipses < 0) throw DomainError("generate_phantom: negative ellipse count");
  if (spec.intensity_min > spec.intensity_max) {
    throw DomainError("generate_phantom: intensity_min > intensity_max");
  }
  const auto n = static_cast<std::size_t>(spec.size);
  std::vector<double> raw(n * n, spec.background);
  Rng rng(spec.seed);
  const double s = spec.size;
  for (int e = 0; e < spec.n_ellipses; ++e) {
    const double cx = s * (0.2 + 0.6 * rng.uniform());
    const double cy = s * (0.2 + 0.6 * rng.uniform());
    const double ax = s * (0.05 + 0.25 * rng.uniform());
    const double ay = s * (0.05 + 0.25 * rng.uniform());
    const double theta = std::numbers::pi * rng.uniform();
    const double value =
        spec.intensity_min + (spec.intensity_max - spec.intensity_min) * rng.uniform();
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double u = (dx * ct + dy * st) / ax;
        const double v = (-dx * st + dy * ct) / ay;
        if (u * u + v * v <= 1.0) raw[y * n + x] += value;
      }
    }
  }
  return normalize_intensity(raw, n, n);
}

ImageBuffer normalize_intensity(std::span<const double> raw, std::size_t width, std::size_t height,
                                double lo, double hi) {
  if (!(hi > lo)) throw DomainError("normalize_intensity: need hi > lo");
  if (raw.size() != width * height) throw DomainError("normalize_intensity: size mismatch");
  std::vector<double> out(raw.size());
  const double span = hi - lo;
  std::transform(raw.begin(), raw.end(), out.begin(),
                 [&](double v) { return std::clamp((v - lo) / span, 0.0, 1.0); });
  return ImageBuffer(width, height, std::move(out));
}

ImageBuffer simulate_low_dose(const ImageBuffer& x0, double dose_fraction, Rng& rng,
                              double photon_budget) {
  if (!(dose_fraction > 0.0 && dose_fraction <= 1.0)) {
    throw DomainError("simulate_low_dose: dose_fraction must lie in (0, 1]");
  }
  if (!(photon_budget > 0.0)) throw DomainError("simulate_low_dose: photon budget must be > 0");
  if (std::isinf(photon_budget)) return x0;
  const double scale = dose_fraction * photon_budget;
  ImageBuffer out(x0.width(), x0.height());
  auto o = out.values();
  auto in = x0.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double mean = std::max(0.0, scale * in[i]);
    const double counts = mean > 0.0 ? static_cast<double>(rng.poisson(mean)) : 0.0;
    o[i] = std::clamp(counts / scale, 0.0, 1.0);
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'A', 'S', 'T', 'I', 'M', 'G', '0', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xffU));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[offset + k]) << (8 * k);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_image(const ImageBuffer& img) {
  if (img.width() > 0xffffffffULL || img.height() > 0xffffffffULL) {
    throw FormatError(FormatError::Kind::DimensionOverflow, "encode_image: dimensions exceed u32");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kImageHeaderBytes + 4 * img.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(img.width()));
  put_u32(out, static_cast<std::uint32_t>(img.height()));
  for (double v : img.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

ImageBuffer decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic ||
      !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError(FormatError::Kind::BadMagic, "ASTIMG01: bad magic");
  }
  if (bytes.size() < kImageHeaderBytes) {
    throw FormatError(FormatError::Kind::Truncated, "ASTIMG01: truncated header");
  }
  const std::uint64_t w = get_u32(bytes, 8);
  const std::uint64_t h = get_u32(bytes, 12);
  if (w == 0 || h == 0 || w * h > kMaxImagePixels) {
    throw FormatError(FormatError::Kind::DimensionOverflow,
                      "ASTIMG01: unsupported dimensions " + std::to_string(w) + "x" +
                          std::to_string(h));
  }
  const std::uint64_t expected = kImageHeaderBytes + 4 * w * h;
  if (bytes.size() < expected) {
    throw FormatError(FormatError::Kind::Truncated,
                      "ASTIMG01: truncated payload (" + std::to_string(bytes.size()) + " of " +
                          std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) {
    throw FormatError(FormatError::Kind::TrailingData, "ASTIMG01: trailing bytes after payload");
  }
  std::vector<double> data(static_cast<std::size_t>(w * h));
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kImageHeaderBytes + 4 * i));
  }
  return ImageBuffer(static_cast<std::size_t>(w), static_cast<std::size_t>(h), std::move(data));
}

void write_image(const std::filesystem::path& path, const ImageBuffer& img) {
  const auto bytes = encode_image(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed for " + path.string());
}

ImageBuffer read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

void write_pgm(const std::filesystem::path& path, const ImageBuffer& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (double v : img.values()) {
    out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  out << kManifestHeader << '\n';
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.dose_fraction);
    out << e.pair_id << ',' << e.full_path << ',' << e.low_path << ',' << buf << ',' << e.seed
        << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kManifestHeader) throw ConfigError("manifest: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) f.push_back(cur);
    if (f.size() != 5) {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": expected 5 fields");
    }
    ManifestEntry e;
    e.pair_id = f[0];
    e.full_path = f[1];
    e.low_path = f[2];
    try {
      e.dose_fraction = std::stod(f[3]);
      e.seed = std::stoull(f[4]);
    } catch (const std::exception&) {
      throw ConfigError("manifest line " + std::to_string(lineno) + ": bad number");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace astn
