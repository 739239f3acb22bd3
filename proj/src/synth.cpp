#include "gridgaf/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace gridgaf {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) {
    throw std::invalid_argument(std::string("generator range ") + name +
                                ": min must not exceed max");
  }
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw std::invalid_argument(std::string("generator range ") + name +
                                ": non-finite bound");
  }
}

double draw(Rng& rng, const Range& r) { return rng.uniform(r.lo, r.hi); }

}  // namespace

void GeneratorConfig::validate() const {
  if (!(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("generator: sample_rate_hz must be positive");
  }
  if (!(duration_s > 0.0)) {
    throw std::invalid_argument("generator: duration_s must be positive");
  }
  const double n = duration_s * sample_rate_hz;
  if (std::abs(n - std::round(n)) > 1e-9 || std::round(n) < 1.0) {
    throw std::invalid_argument(
        "generator: duration_s * sample_rate_hz must be a positive integer");
  }
  if (noise_sigma_deg < 0.0) {
    throw std::invalid_argument("generator: noise_sigma_deg must be nonnegative");
  }
  check_range(base_angle_deg, "base_angle_deg");
  check_range(step_amplitude_deg, "step_amplitude_deg");
  check_range(time_constant_s, "time_constant_s");
  check_range(osc_freq_hz, "osc_freq_hz");
  check_range(osc_damping, "osc_damping");
  check_range(osc_amplitude_deg, "osc_amplitude_deg");
  check_range(osc_phase_rad, "osc_phase_rad");
}

std::size_t GeneratorConfig::samples_per_event() const {
  return static_cast<std::size_t>(std::round(duration_s * sample_rate_hz));
}

namespace {

// Shared body of trip/shedding: sign -1 drifts down, +1 drifts up.
TimeSeriesEvent gen_step_event(const GeneratorConfig& cfg, Rng& rng,
                               std::string event_id, Label label, double sign) {
  cfg.validate();
  TimeSeriesEvent ev;
  ev.event_id = std::move(event_id);
  ev.label = label;
  ev.sample_rate_hz = cfg.sample_rate_hz;

  const double theta0 = draw(rng, cfg.base_angle_deg);
  const double amp = draw(rng, cfg.step_amplitude_deg);
  const double tau = draw(rng, cfg.time_constant_s);

  const std::size_t n = cfg.samples_per_event();
  ev.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate_hz;
    double angle = theta0;
    if (t >= cfg.event_onset_s) {
      const double tp = t - cfg.event_onset_s;
      const double ramp = (tau > 0.0)
                              ? tp - tau * (1.0 - std::exp(-tp / tau))
                              : tp;
      angle += sign * amp * ramp;
    }
    if (cfg.noise_sigma_deg > 0.0) {
      angle += cfg.noise_sigma_deg * rng.gaussian();
    }
    ev.samples.push_back(angle);
  }
  return ev;
}

}  // namespace

TimeSeriesEvent gen_generation_trip(const GeneratorConfig& cfg, Rng& rng,
                                    std::string event_id) {
  return gen_step_event(cfg, rng, std::move(event_id), Label::GenerationTrip, -1.0);
}

TimeSeriesEvent gen_load_shedding(const GeneratorConfig& cfg, Rng& rng,
                                  std::string event_id) {
  return gen_step_event(cfg, rng, std::move(event_id), Label::LoadShedding, +1.0);
}

TimeSeriesEvent gen_oscillation(const GeneratorConfig& cfg, Rng& rng,
                                std::string event_id) {
  cfg.validate();
  TimeSeriesEvent ev;
  ev.event_id = std::move(event_id);
  ev.label = Label::Oscillation;
  ev.sample_rate_hz = cfg.sample_rate_hz;

  const double theta0 = draw(rng, cfg.base_angle_deg);
  const double amp = draw(rng, cfg.osc_amplitude_deg);
  const double freq = draw(rng, cfg.osc_freq_hz);
  const double zeta = draw(rng, cfg.osc_damping);
  const double phi = draw(rng, cfg.osc_phase_rad);
  const double omega = 2.0 * std::numbers::pi * freq;

  const std::size_t n = cfg.samples_per_event();
  ev.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / cfg.sample_rate_hz;
    double angle = theta0;
    if (t >= cfg.event_onset_s) {
      const double tp = t - cfg.event_onset_s;
      angle += amp * std::exp(-zeta * omega * tp) * std::sin(omega * tp + phi);
    }
    if (cfg.noise_sigma_deg > 0.0) {
      angle += cfg.noise_sigma_deg * rng.gaussian();
    }
    ev.samples.push_back(angle);
  }
  return ev;
}

Dataset build_dataset(const GeneratorConfig& cfg,
                      const std::array<std::size_t, kNumClasses>& counts) {
  cfg.validate();
  for (std::size_t c : counts) {
    if (c == 0) throw std::invalid_argument("build_dataset: counts must be positive");
  }
  Dataset data;
  std::uint64_t index = 0;
  char idbuf[64];
  for (int c = 0; c < kNumClasses; ++c) {
    const Label label = kAllLabels[c];
    for (std::size_t k = 0; k < counts[c]; ++k, ++index) {
      Rng rng(derive_stream(cfg.seed, index));
      std::snprintf(idbuf, sizeof idbuf, "%s_%04zu", to_string(label), k);
      switch (label) {
        case Label::GenerationTrip:
          data.add(gen_generation_trip(cfg, rng, idbuf));
          break;
        case Label::LoadShedding:
          data.add(gen_load_shedding(cfg, rng, idbuf));
          break;
        case Label::Oscillation:
          data.add(gen_oscillation(cfg, rng, idbuf));
          break;
      }
    }
  }
  return data;
}

}  // namespace gridgaf
