#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "gridgaf/data_model.hpp"
#include "gridgaf/rng.hpp"

namespace gridgaf {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Synthetic disturbance generator. Waveform families:
//   generation trip:  theta0 - A*(t' - tau*(1 - exp(-t'/tau)))   for t >= onset
//   load shedding:    theta0 + A*(t' - tau*(1 - exp(-t'/tau)))
//   oscillation:      theta0 + B*exp(-zeta*w*t')*sin(w*t' + phi), w = 2*pi*f
// with t' = t - onset, Gaussian noise of noise_sigma_deg on every sample, and
// all per-event parameters drawn uniformly from the ranges below.
// Defaults give mildly overlapping classes: the weakest drifts and
// oscillations sit close to the noise floor, so trained classifiers land a
// little below 100% instead of saturating.
struct GeneratorConfig {
  double sample_rate_hz = 10.0;
  double duration_s = 60.0;
  double noise_sigma_deg = 1.2;
  double event_onset_s = 5.0;
  Range base_angle_deg{-10.0, 10.0};    // theta0
  Range step_amplitude_deg{0.25, 1.6};  // A, post-onset drift rate (deg/s)
  Range time_constant_s{1.0, 4.0};      // tau
  Range osc_freq_hz{0.2, 1.0};          // f
  Range osc_damping{0.03, 0.12};        // zeta
  Range osc_amplitude_deg{0.8, 3.5};    // B
  Range osc_phase_rad{0.0, 6.283185307179586};  // phi
  std::uint64_t seed = 0;

  void validate() const;  // ranges ordered, duration*rate a positive integer
  std::size_t samples_per_event() const;
};

// Draw order per event: theta0, then the class parameters in the order they
// appear in the waveform formula, then one noise draw per sample.
TimeSeriesEvent gen_generation_trip(const GeneratorConfig& cfg, Rng& rng,
                                    std::string event_id = "generation_trip_0");
TimeSeriesEvent gen_load_shedding(const GeneratorConfig& cfg, Rng& rng,
                                  std::string event_id = "load_shedding_0");
TimeSeriesEvent gen_oscillation(const GeneratorConfig& cfg, Rng& rng,
                                std::string event_id = "oscillation_0");

// counts indexed by Label; each event generated from its own PRNG stream
// derived from (cfg.seed, global event index), so output does not depend on
// generation order.
Dataset build_dataset(const GeneratorConfig& cfg,
                      const std::array<std::size_t, kNumClasses>& counts);

}  // namespace gridgaf
