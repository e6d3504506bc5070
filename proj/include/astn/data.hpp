#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "astn/image.hpp"
#include "astn/rng.hpp"

namespace astn {

/// Fixed intensity window (HU) mapped onto [0, 1].
inline constexpr double kIntensityLo = -1024.0;
inline constexpr double kIntensityHi = 3072.0;
/// Photon budget at full dose for the image-domain Poisson surrogate.
inline constexpr double kDefaultPhotonBudget = 4096.0;

struct PhantomSpec {
  int size = 64;
  int n_ellipses = 5;
  /// HU contribution range of each ellipse.
  double intensity_min = -200.0;
  double intensity_max = 800.0;
  /// Background HU (water).
  double background = 0.0;
  std::uint64_t seed = 0;
};

/// Random rotated ellipses on a uniform background, clamped to the HU window
/// and normalized to [0, 1]. Deterministic in spec.seed. Requires size >= 32.
ImageBuffer generate_phantom(const PhantomSpec& spec);

/// (v - lo) / (hi - lo), clamped to [0, 1].
ImageBuffer normalize_intensity(std::span<const double> raw, std::size_t width, std::size_t height,
                                double lo = kIntensityLo, double hi = kIntensityHi);

/// Image-domain low-dose surrogate: counts ~ Poisson(dose * photon_budget * x0),
/// rescaled by the same factor and clamped to [0, 1]. Unbiased before
/// clamping, variance x0 / (dose * photon_budget). An infinite budget returns
/// x0 unchanged.
ImageBuffer simulate_low_dose(const ImageBuffer& x0, double dose_fraction, Rng& rng,
                              double photon_budget = kDefaultPhotonBudget);

struct DosePair {
  ImageBuffer full_dose;
  ImageBuffer low_dose;
  double dose_fraction = 1.0;
};

// ASTIMG01: 8-byte magic "ASTIMG01", u32 LE width, u32 LE height, then
// width*height f32 LE values row-major. Values are narrowed to float32 on
// write, so write -> read -> write is bit-exact.
inline constexpr std::size_t kImageHeaderBytes = 16;
inline constexpr std::uint64_t kMaxImagePixels = std::uint64_t{1} << 28;

std::vector<std::uint8_t> encode_image(const ImageBuffer& img);
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);
void write_image(const std::filesystem::path& path, const ImageBuffer& img);
ImageBuffer read_image(const std::filesystem::path& path);

/// 8-bit binary PGM preview; values clamped to [0, 1].
void write_pgm(const std::filesystem::path& path, const ImageBuffer& img);

struct ManifestEntry {
  std::string pair_id;
  std::string full_path;
  std::string low_path;
  double dose_fraction = 1.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kManifestHeader = "pair_id,full_path,low_path,dose_fraction,seed";

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& in);

}  // namespace astn
