#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gridgaf {

enum class Label : int { GenerationTrip = 0, LoadShedding = 1, Oscillation = 2 };
inline constexpr int kNumClasses = 3;
inline constexpr Label kAllLabels[kNumClasses] = {
    Label::GenerationTrip, Label::LoadShedding, Label::Oscillation};

const char* to_string(Label label);
Label label_from_string(const std::string& s);  // throws on unknown label

// One labeled angle series from a single sensor.
struct TimeSeriesEvent {
  std::string event_id;
  Label label = Label::GenerationTrip;
  double sample_rate_hz = 10.0;
  std::vector<double> samples;  // angle, degrees

  void validate() const;  // non-empty, finite samples, positive rate
};

struct Dataset {
  std::vector<TimeSeriesEvent> events;
  std::array<std::size_t, kNumClasses> class_counts{};

  void add(TimeSeriesEvent ev);
  std::size_t size() const { return events.size(); }
  std::array<std::size_t, kNumClasses> recount() const;
  // class_counts agree with an exhaustive recount, event ids unique
  void validate() const;
};

struct SplitResult {
  Dataset train;
  Dataset test;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

// Manifest: JSON array of {"path", "label", "event_id"}; CSV paths are
// resolved relative to the manifest's directory. Event CSV: header
// `timestamp_s,angle_deg`, one decimal-text row per sample.
Dataset load_events(const std::filesystem::path& manifest_path);

// Writes one `<event_id>.csv` per event plus a manifest; values printed with
// 17 significant digits so a reload reproduces every sample bit-for-bit.
void save_dataset(const Dataset& data, const std::filesystem::path& dir,
                  const std::string& manifest_name = "manifest.json");

// First floor(seconds * sample_rate_hz) samples; id/label/rate preserved.
TimeSeriesEvent truncate_window(const TimeSeriesEvent& event, double seconds);

// Per class: shuffle with a stream derived from (seed, class), first
// floor(fraction * count) events go to train, the rest to test.
SplitResult stratified_split(const Dataset& data, double fraction,
                             std::uint64_t seed);

// floor(x) robust to the representation error of rationals like 2/3: nudges
// by 1e-9 so 2/3 * 87 counts as 58, not 57.
std::size_t floor_count(double x);

}  // namespace gridgaf
