#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gridgaf/gaf.hpp"
#include "gridgaf/rng.hpp"
#include "test_util.hpp"

using namespace gridgaf;

namespace {

TimeSeriesEvent make_event(std::vector<double> samples, double rate = 10.0) {
  TimeSeriesEvent ev;
  ev.event_id = "t";
  ev.label = Label::Oscillation;
  ev.sample_rate_hz = rate;
  ev.samples = std::move(samples);
  return ev;
}

// product-form oracle: G = xx' - sqrt(1-x^2) sqrt(1-x^2)'
double product_form(double xi, double xj) {
  return xi * xj - std::sqrt(1.0 - xi * xi) * std::sqrt(1.0 - xj * xj);
}

}  // namespace

TEST_SUITE("gaf") {

TEST_CASE("rescale endpoints, degenerate series, and errors") {
  CHECK(rescale_min_max({1, 2, 3}) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(rescale_min_max({5, 5, 5}) == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(rescale_min_max({-10, 10}) == std::vector<double>{0.0, 1.0});
  CHECK_THROWS(rescale_min_max({}));
  CHECK_THROWS(rescale_min_max({1.0, std::nan("")}));
}

TEST_CASE("polar angles hit the arccos table and clamp roundoff") {
  const auto angles = polar_angles({0.0, 0.5, 1.0});
  CHECK(angles[0] == doctest::Approx(std::acos(0.0)).epsilon(1e-15));
  CHECK(angles[1] == doctest::Approx(std::acos(0.5)).epsilon(1e-15));
  CHECK(angles[2] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(polar_angles({1.0}) == std::vector<double>{0.0});
  // roundoff just past the ends clamps; far outside throws
  CHECK(polar_angles({1.0 + 1e-15})[0] == 0.0);
  CHECK(polar_angles({-1e-15})[0] == doctest::Approx(std::acos(0.0)));
  CHECK_THROWS(polar_angles({1.1}));
  CHECK_THROWS(polar_angles({-0.1}));
}

TEST_CASE("two-point series [0,1] maps to [[-1,0],[0,1]]") {
  const GafImage g = gaf_matrix(polar_angles(rescale_min_max({0.0, 1.0})));
  CHECK(g.size == 2);
  CHECK(std::abs(g.at(0, 0) - (-1.0)) < 1e-15);
  CHECK(std::abs(g.at(0, 1) - 0.0) < 1e-15);
  CHECK(std::abs(g.at(1, 0) - 0.0) < 1e-15);
  CHECK(std::abs(g.at(1, 1) - 1.0) < 1e-15);
}

TEST_CASE("three-point series hits the exact cosine table") {
  const GafImage g = gaf_matrix(polar_angles(rescale_min_max({0.0, 0.5, 1.0})));
  const double s3 = std::sqrt(3.0) / 2.0;
  const double expected[3][3] = {{-1.0, -s3, 0.0},
                                 {-s3, -0.5, 0.5},
                                 {0.0, 0.5, 1.0}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(g.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) -
                     expected[i][j]) < 1e-15);
    }
  }
}

TEST_CASE("symmetry is bitwise, entries bounded, identities hold") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(127);
    // angle values on a 0.01-degree sensor grid: rescaled values near but not
    // at 0 stay large enough that the sqrt reconstruction below is
    // well-conditioned in double precision
    std::vector<double> series(n);
    for (double& v : series) {
      v = 0.01 * static_cast<double>(static_cast<std::int64_t>(rng.below(10000)) - 5000);
    }
    const auto rescaled = rescale_min_max(series);
    const GafImage g = gaf_matrix(polar_angles(rescaled));
    for (std::size_t i = 0; i < n; ++i) {
      // diagonal identity and reconstruction
      CHECK(std::abs(g.at(i, i) - (2.0 * rescaled[i] * rescaled[i] - 1.0)) < 1e-12);
      CHECK(std::abs(std::sqrt((g.at(i, i) + 1.0) / 2.0) - rescaled[i]) < 1e-12);
      for (std::size_t j = i; j < n; ++j) {
        const double v = g.at(i, j);
        CHECK(std::memcmp(&v, &g.values[j * n + i], sizeof(double)) == 0);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        CHECK(std::abs(v - product_form(rescaled[i], rescaled[j])) < 1e-12);
      }
    }
  }
}

TEST_CASE("paa bins match the uneven-bin rule") {
  CHECK(paa_reduce({1, 2, 3, 4}, 2) == std::vector<double>{1.5, 3.5});
  CHECK(paa_reduce({1, 2, 3}, 3) == std::vector<double>{1, 2, 3});  // identity
  CHECK(paa_reduce({1, 2, 3}, 2) == std::vector<double>{1.5, 3.0});
  CHECK_THROWS(paa_reduce({1, 2}, 3));
}

TEST_CASE("paa preserves the mean when the target divides the length") {
  Rng rng(5);
  const auto series = testutil::random_vector(256, rng, -10.0, 10.0);
  const auto reduced = paa_reduce(series, 64);
  double mean_full = 0.0, mean_red = 0.0;
  for (double v : series) mean_full += v;
  for (double v : reduced) mean_red += v;
  mean_full /= 256.0;
  mean_red /= 64.0;
  CHECK(std::abs(mean_full - mean_red) < 1e-12);
}

TEST_CASE("encode_event shapes and the constant-image value") {
  Rng rng(6);
  auto ev = make_event(testutil::random_vector(600, rng));
  const GafImage img = encode_event(ev, 30.0, 64);
  CHECK(img.size == 64);
  CHECK(img.source_event_id == "t");
  CHECK(img.values.size() == 64 * 64);

  auto flat = make_event(std::vector<double>(600, 7.25));
  const GafImage c = encode_event(flat, 30.0, 64);
  for (double v : c.values) {
    CHECK(std::abs(v - (-0.5)) < 1e-12);  // cos(2*pi/3)
  }
  CHECK(c.rescale_min == 7.25);
  CHECK(c.rescale_max == 7.25);
}

TEST_CASE("reversing the series mirrors the image on both axes") {
  Rng rng(7);
  // 256 samples at 10 Hz; window 25.6 s keeps all, PAA 64 divides exactly
  auto ev = make_event(testutil::random_vector(256, rng, -3.0, 9.0));
  auto rev = ev;
  std::reverse(rev.samples.begin(), rev.samples.end());
  const GafImage a = encode_event(ev, 25.6, 64);
  const GafImage b = encode_event(rev, 25.6, 64);
  const std::size_t S = a.size;
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = 0; j < S; ++j) {
      CHECK(b.at(i, j) == doctest::Approx(a.at(S - 1 - i, S - 1 - j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("encoding is invariant to exactly-representable affine maps") {
  Rng rng(8);
  // dyadic samples so a*x+b stays exact in floating point
  std::vector<double> base(256);
  for (double& v : base) {
    v = static_cast<double>(rng.below(1 << 20)) * 0x1.0p-20;
  }
  auto ev = make_event(base);
  auto scaled = ev;
  for (double& v : scaled.samples) v = 4.0 * v + 3.5;
  const GafImage a = encode_event(ev, 25.6, 64);
  const GafImage b = encode_event(scaled, 25.6, 64);
  CHECK(a.values == b.values);  // bitwise

  // a < 0 flips to the reflected encoding
  auto negated = ev;
  for (double& v : negated.samples) v = -2.0 * v;
  const GafImage c = encode_event(negated, 25.6, 64);
  const auto reflected = polar_angles(rescale_min_max(
      [&] {
        auto r = rescale_min_max(paa_reduce(ev.samples, 64));
        for (double& v : r) v = 1.0 - v;
        return r;
      }()));
  const GafImage expect = gaf_matrix(reflected);
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    CHECK(c.values[i] == doctest::Approx(expect.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("pgm bytes: endpoints, rounding, and layout") {
  GafImage img;
  img.size = 2;
  img.values = {-1.0, 1.0, 0.0, -0.5};
  const auto path = std::filesystem::temp_directory_path() / "gridgaf_pgm_test.pgm";
  export_pgm(img, path);
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(content.size() == header.size() + 4);
  CHECK(content.substr(0, header.size()) == header);
  const auto* px = reinterpret_cast<const unsigned char*>(content.data() + header.size());
  CHECK(px[0] == 0);    // -1
  CHECK(px[1] == 255);  // +1
  CHECK(px[2] == 128);  // 0 -> round-half-up(127.5)
  CHECK(px[3] == 64);   // -0.5 -> round(63.75)
}

TEST_CASE("raw gaf binary round-trips bit-for-bit") {
  Rng rng(9);
  auto ev = make_event(testutil::random_vector(600, rng));
  const GafImage img = encode_event(ev, 30.0, 32);
  const auto path = std::filesystem::temp_directory_path() / "gridgaf_mat_test.gaf";
  write_gaf_binary(img, path);
  CHECK(std::filesystem::file_size(path) == 8 + 32 * 32 * 8);
  const GafImage back = read_gaf_binary(path);
  CHECK(back.size == img.size);
  CHECK(back.values == img.values);
}

}  // TEST_SUITE
