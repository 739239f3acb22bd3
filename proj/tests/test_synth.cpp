#include <cmath>

#include "doctest.h"
#include "gridgaf/data_model.hpp"
#include "gridgaf/synth.hpp"

using namespace gridgaf;

namespace {

GeneratorConfig quiet_cfg() {
  GeneratorConfig cfg;
  cfg.noise_sigma_deg = 0.0;
  cfg.duration_s = 30.0;
  cfg.event_onset_s = 0.0;
  cfg.base_angle_deg = {3.0, 3.0};
  return cfg;
}

// closed forms evaluated independently of the generator
double trip_formula(double theta0, double amp, double tau, double tp) {
  return theta0 - amp * (tp - tau * (1.0 - std::exp(-tp / tau)));
}

double osc_formula(double theta0, double amp, double f, double zeta,
                   double phi, double tp) {
  const double w = 2.0 * 3.14159265358979323846 * f;
  return theta0 + amp * std::exp(-zeta * w * tp) * std::sin(w * tp + phi);
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("trip at onset equals theta0 when t'=0") {
  GeneratorConfig cfg = quiet_cfg();
  cfg.step_amplitude_deg = {1.0, 1.0};
  cfg.time_constant_s = {1.0, 1.0};
  Rng rng(1);
  const auto ev = gen_generation_trip(cfg, rng);
  CHECK(ev.samples[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(ev.label == Label::GenerationTrip);
  CHECK(ev.samples.size() == 300);
}

TEST_CASE("noiseless waveforms match their closed forms to 1e-12") {
  GeneratorConfig cfg = quiet_cfg();
  cfg.event_onset_s = 5.0;
  cfg.base_angle_deg = {-4.0, -4.0};
  cfg.step_amplitude_deg = {1.3, 1.3};
  cfg.time_constant_s = {2.0, 2.0};
  Rng r1(9);
  const auto trip = gen_generation_trip(cfg, r1);
  for (std::size_t k = 0; k < trip.samples.size(); ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate_hz;
    const double expected =
        t >= 5.0 ? trip_formula(-4.0, 1.3, 2.0, t - 5.0) : -4.0;
    CHECK(std::abs(trip.samples[k] - expected) < 1e-12);
  }

  cfg.osc_amplitude_deg = {2.5, 2.5};
  cfg.osc_freq_hz = {0.4, 0.4};
  cfg.osc_damping = {0.05, 0.05};
  cfg.osc_phase_rad = {1.0, 1.0};
  Rng r2(9);
  const auto osc = gen_oscillation(cfg, r2);
  for (std::size_t k = 0; k < osc.samples.size(); ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate_hz;
    const double expected =
        t >= 5.0 ? osc_formula(-4.0, 2.5, 0.4, 0.05, 1.0, t - 5.0) : -4.0;
    CHECK(std::abs(osc.samples[k] - expected) < 1e-12);
  }
}

TEST_CASE("noiseless trip is monotone non-increasing, shedding non-decreasing") {
  GeneratorConfig cfg = quiet_cfg();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r1(seed), r2(seed);
    const auto trip = gen_generation_trip(cfg, r1);
    const auto shed = gen_load_shedding(cfg, r2);
    for (std::size_t k = 1; k < trip.samples.size(); ++k) {
      CHECK(trip.samples[k] <= trip.samples[k - 1] + 1e-12);
      CHECK(shed.samples[k] >= shed.samples[k - 1] - 1e-12);
    }
  }
}

TEST_CASE("shedding is the trip mirrored about theta0 for equal draws") {
  GeneratorConfig cfg = quiet_cfg();
  Rng r1(33), r2(33);
  const auto trip = gen_generation_trip(cfg, r1);
  const auto shed = gen_load_shedding(cfg, r2);
  for (std::size_t k = 0; k < trip.samples.size(); ++k) {
    CHECK((shed.samples[k] - 3.0) == doctest::Approx(-(trip.samples[k] - 3.0)).epsilon(1e-15));
  }
}

TEST_CASE("oscillation hits sin(pi/2)=1 at t=0.5s for the pinned draw") {
  GeneratorConfig cfg = quiet_cfg();
  cfg.base_angle_deg = {0.0, 0.0};
  cfg.osc_amplitude_deg = {1.0, 1.0};
  cfg.osc_freq_hz = {0.5, 0.5};
  cfg.osc_damping = {0.0, 0.0};
  cfg.osc_phase_rad = {0.0, 0.0};
  Rng rng(2);
  const auto ev = gen_oscillation(cfg, rng);
  CHECK(ev.samples[0] == doctest::Approx(0.0).epsilon(1e-15));  // sin(0)
  CHECK(ev.samples[5] == doctest::Approx(1.0).epsilon(1e-12));  // t=0.5 s
}

TEST_CASE("damped oscillation respects its envelope") {
  GeneratorConfig cfg = quiet_cfg();
  cfg.base_angle_deg = {0.0, 0.0};
  cfg.osc_amplitude_deg = {3.0, 3.0};
  cfg.osc_damping = {0.08, 0.08};
  Rng rng(4);
  const auto ev = gen_oscillation(cfg, rng);
  // freq and phase drawn; recover envelope bound from config values
  for (std::size_t k = 0; k < ev.samples.size(); ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate_hz;
    const double w = 2.0 * 3.14159265358979323846 * cfg.osc_freq_hz.lo;
    // widest envelope uses the lowest frequency (slowest decay)
    const double bound = 3.0 * std::exp(-0.08 * w * t) + 1e-12;
    CHECK(std::abs(ev.samples[k]) <= doctest::Approx(3.0 + 1e-12));
    if (cfg.osc_freq_hz.lo == cfg.osc_freq_hz.hi) {
      CHECK(std::abs(ev.samples[k]) <= bound);
    }
  }
}

TEST_CASE("same config and seed give identical series") {
  GeneratorConfig cfg;
  cfg.duration_s = 10.0;
  cfg.seed = 77;
  const Dataset a = build_dataset(cfg, {3, 3, 3});
  const Dataset b = build_dataset(cfg, {3, 3, 3});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.events[i].event_id == b.events[i].event_id);
    CHECK(a.events[i].samples == b.events[i].samples);
  }
}

TEST_CASE("build_dataset honors counts and produces unique ids") {
  GeneratorConfig cfg;
  cfg.duration_s = 6.0;
  const Dataset d = build_dataset(cfg, {142, 145, 87});
  CHECK(d.size() == 374);
  CHECK(d.class_counts == std::array<std::size_t, 3>{142, 145, 87});
  d.validate();

  const Dataset tiny = build_dataset(cfg, {1, 1, 1});
  CHECK(tiny.size() == 3);
  CHECK(tiny.class_counts == std::array<std::size_t, 3>{1, 1, 1});
}

TEST_CASE("generated length equals duration times rate") {
  GeneratorConfig cfg;
  cfg.duration_s = 60.0;
  cfg.sample_rate_hz = 10.0;
  Rng rng(0);
  CHECK(gen_generation_trip(cfg, rng).samples.size() == 600);
  GeneratorConfig bad = cfg;
  bad.duration_s = 0.55;  // 5.5 samples
  CHECK_THROWS(bad.validate());
}

TEST_CASE("default classes are separable: 1-NN leave-one-out above 80%") {
  GeneratorConfig cfg;  // defaults, noise included
  cfg.seed = 20260808;
  const Dataset data = build_dataset(cfg, {10, 10, 10});
  std::vector<TimeSeriesEvent> windows;
  for (const auto& ev : data.events) windows.push_back(truncate_window(ev, 30.0));

  // brute-force 1-nearest-neighbor on raw truncated series
  std::size_t correct = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    double best_d = 1e300;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < windows.size(); ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < windows[i].samples.size(); ++k) {
        const double d = windows[i].samples[k] - windows[j].samples[k];
        d2 += d * d;
      }
      if (d2 < best_d) {
        best_d = d2;
        best_j = j;
      }
    }
    if (windows[best_j].label == windows[i].label) ++correct;
  }
  const double loo = static_cast<double>(correct) / static_cast<double>(windows.size());
  CHECK(loo > 0.8);
}

}  // TEST_SUITE
