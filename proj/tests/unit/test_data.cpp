#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "astn/data.hpp"
#include "astn/error.hpp"
#include "helpers.hpp"

using namespace astn;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FormatError::Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    (void)decode_image(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode_image accepted malformed bytes");
  return FormatError::Kind::Io;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("phantoms are deterministic, normalized and varied") {
    PhantomSpec spec;
    spec.seed = 3;
    const auto a = generate_phantom(spec);
    CHECK(a.width() == 64);
    CHECK(a == generate_phantom(spec));
    CHECK(a.min() >= 0.0);
    CHECK(a.max() <= 1.0);
    CHECK(a.max() > a.min());
    spec.seed = 4;
    CHECK_FALSE(a == generate_phantom(spec));

    PhantomSpec blank;
    blank.n_ellipses = 0;
    const auto b = generate_phantom(blank);
    CHECK(b.min() == doctest::Approx(1024.0 / 4096.0));
    CHECK(b.max() == b.min());

    blank.size = 16;
    CHECK_THROWS_AS(generate_phantom(blank), DomainError);
  }

  TEST_CASE("normalize_intensity clamps to the window") {
    const std::vector<double> raw{-2000, -1024, 0, 3072, 5000};
    const auto n = normalize_intensity(raw, 5, 1);
    CHECK(n[0] == 0.0);
    CHECK(n[1] == 0.0);
    CHECK(n[2] == doctest::Approx(0.25));
    CHECK(n[3] == 1.0);
    CHECK(n[4] == 1.0);
  }

  TEST_CASE("low-dose surrogate: unbiased with variance x0 / (dose * budget)") {
    const ImageBuffer x0(100, 100, 0.3);
    Rng rng(12);
    const double dose = 0.25;
    const auto low = simulate_low_dose(x0, dose, rng);
    double s = 0.0;
    double s2 = 0.0;
    for (double v : low.values()) {
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(low.size());
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    const double want_var = 0.3 / (dose * kDefaultPhotonBudget);
    CHECK(std::abs(mean - 0.3) < 5.0 * std::sqrt(want_var / n));
    CHECK(var == doctest::Approx(want_var).epsilon(0.05));

    Rng r2(12);
    CHECK(simulate_low_dose(x0, dose, r2) == low);
    CHECK(simulate_low_dose(x0, 0.5, rng, std::numeric_limits<double>::infinity()) == x0);
    CHECK_THROWS_AS(simulate_low_dose(x0, 0.0, rng), DomainError);
    CHECK_THROWS_AS(simulate_low_dose(x0, 1.5, rng), DomainError);
  }

  TEST_CASE("ASTIMG01 golden file") {
    const auto golden = slurp(std::filesystem::path(ASTN_GOLDEN_DIR) / "image_2x2.astimg");
    REQUIRE(golden.size() == kImageHeaderBytes + 16);
    const ImageBuffer img(2, 2, std::vector<double>{0.0, 0.25, 0.5, 1.0});
    CHECK(encode_image(img) == golden);
    CHECK(decode_image(golden) == img);
  }

  TEST_CASE("ASTIMG01 round trip is bit-exact") {
    Rng rng(2);
    const auto img = rng.normal_image(7, 5);
    const auto once = decode_image(encode_image(img));
    CHECK(test::max_abs_diff(once, img) < 1e-6);
    CHECK(encode_image(once) == encode_image(img));
    CHECK(decode_image(encode_image(once)) == once);

    const auto dir = test::scratch_dir("image_io");
    write_image(dir / "a.astimg", once);
    CHECK(read_image(dir / "a.astimg") == once);
    CHECK_THROWS_AS(read_image(dir / "missing.astimg"), FormatError);
  }

  TEST_CASE("ASTIMG01 malformed input") {
    auto good = encode_image(ImageBuffer(2, 2, 0.5));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(decode_kind(bad_magic) == FormatError::Kind::BadMagic);
    CHECK(decode_kind({good.begin(), good.begin() + 12}) == FormatError::Kind::Truncated);
    CHECK(decode_kind({good.begin(), good.end() - 1}) == FormatError::Kind::Truncated);
    auto trailing = good;
    trailing.push_back(0);
    CHECK(decode_kind(trailing) == FormatError::Kind::TrailingData);
    auto huge = good;
    huge[8] = huge[9] = huge[10] = huge[11] = 0xff;
    huge[12] = huge[13] = huge[14] = huge[15] = 0xff;
    CHECK(decode_kind(huge) == FormatError::Kind::DimensionOverflow);
    auto zero = good;
    zero[8] = 0;
    CHECK(decode_kind(zero) == FormatError::Kind::DimensionOverflow);
  }

  TEST_CASE("PGM preview") {
    const auto dir = test::scratch_dir("pgm");
    write_pgm(dir / "a.pgm", ImageBuffer(3, 2, std::vector<double>{0, 0.5, 1, 2, -1, 0.25}));
    const auto bytes = slurp(dir / "a.pgm");
    const std::string head(bytes.begin(), bytes.begin() + 11);
    CHECK(head == "P5\n3 2\n255\n");
    REQUIRE(bytes.size() == 17);
    CHECK(bytes[11] == 0);
    CHECK(bytes[13] == 255);
    CHECK(bytes[14] == 255);
    CHECK(bytes[15] == 0);
  }

  TEST_CASE("manifest round trip") {
    const std::vector<ManifestEntry> entries{{"p0000_d0", "images/a.astimg", "images/b.astimg", 0.25, 99},
                                             {"p0000_d1", "images/a.astimg", "images/c.astimg", 0.1, 100}};
    std::stringstream ss;
    write_manifest(ss, entries);
    const auto back = read_manifest(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].low_path == "images/c.astimg");
    CHECK(back[1].dose_fraction == 0.1);
    CHECK(back[0].seed == 99);

    std::stringstream bad(std::string(kManifestHeader) + "\nx,y\n");
    CHECK_THROWS_AS(read_manifest(bad), ConfigError);
  }
}
