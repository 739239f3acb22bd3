#include "gridgaf/data_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "gridgaf/rng.hpp"
#include "json.hpp"

namespace gridgaf {

const char* to_string(Label label) {
  switch (label) {
    case Label::GenerationTrip: return "generation_trip";
    case Label::LoadShedding: return "load_shedding";
    case Label::Oscillation: return "oscillation";
  }
  return "?";
}

Label label_from_string(const std::string& s) {
  if (s == "generation_trip") return Label::GenerationTrip;
  if (s == "load_shedding") return Label::LoadShedding;
  if (s == "oscillation") return Label::Oscillation;
  throw std::runtime_error("unknown label string: \"" + s + "\"");
}

void TimeSeriesEvent::validate() const {
  if (samples.empty()) {
    throw std::runtime_error("event " + event_id + ": empty sample series");
  }
  if (!(sample_rate_hz > 0.0)) {
    throw std::runtime_error("event " + event_id + ": sample_rate_hz must be positive");
  }
  for (double v : samples) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("event " + event_id + ": non-finite sample value");
    }
  }
}

void Dataset::add(TimeSeriesEvent ev) {
  class_counts[static_cast<int>(ev.label)]++;
  events.push_back(std::move(ev));
}

std::array<std::size_t, kNumClasses> Dataset::recount() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& ev : events) counts[static_cast<int>(ev.label)]++;
  return counts;
}

void Dataset::validate() const {
  if (recount() != class_counts) {
    throw std::runtime_error("dataset: class_counts disagree with recount");
  }
  std::unordered_set<std::string> ids;
  for (const auto& ev : events) {
    if (!ids.insert(ev.event_id).second) {
      throw std::runtime_error("dataset: duplicate event_id \"" + ev.event_id + "\"");
    }
  }
}

namespace {

double parse_field(const std::string& field, const std::filesystem::path& file,
                   std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw std::runtime_error("malformed row in " + file.string() + ":" +
                             std::to_string(line_no) + ": \"" + field + "\"");
  }
  return value;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

// Rate comes from the first timestamp step, snapped to 1e-9 so that the
// decimal-text round trip of k/rate recovers the exact rate.
double infer_rate(double t0, double t1, const std::filesystem::path& file) {
  const double dt = t1 - t0;
  if (!(dt > 0.0)) {
    throw std::runtime_error("non-increasing timestamps in " + file.string());
  }
  return std::round(1e9 / dt) / 1e9;
}

TimeSeriesEvent load_event_csv(const std::filesystem::path& file,
                               const std::string& event_id, Label label) {
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("missing event file: " + file.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty event file: " + file.string());
  }
  strip_cr(line);
  if (line != "timestamp_s,angle_deg") {
    throw std::runtime_error("bad CSV header in " + file.string() + ": \"" + line + "\"");
  }
  TimeSeriesEvent ev;
  ev.event_id = event_id;
  ev.label = label;
  std::vector<double> timestamps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("malformed row in " + file.string() + ":" +
                               std::to_string(line_no) + ": missing comma");
    }
    timestamps.push_back(parse_field(line.substr(0, comma), file, line_no));
    ev.samples.push_back(parse_field(line.substr(comma + 1), file, line_no));
  }
  if (timestamps.size() >= 2) {
    ev.sample_rate_hz = infer_rate(timestamps[0], timestamps[1], file);
  }
  ev.validate();
  return ev;
}

}  // namespace

Dataset load_events(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw std::runtime_error("missing manifest: " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest parse error in " + manifest_path.string() +
                             ": " + e.what());
  }
  if (!manifest.is_array()) {
    throw std::runtime_error("manifest must be a JSON array: " + manifest_path.string());
  }
  const auto base = manifest_path.parent_path();
  Dataset data;
  std::unordered_set<std::string> seen_ids;
  for (const auto& entry : manifest) {
    const std::string rel = entry.at("path").get<std::string>();
    const std::string event_id = entry.at("event_id").get<std::string>();
    const Label label = label_from_string(entry.at("label").get<std::string>());
    if (!seen_ids.insert(event_id).second) {
      throw std::runtime_error("duplicate event_id in manifest: \"" + event_id + "\"");
    }
    std::filesystem::path file(rel);
    if (file.is_relative()) file = base / file;
    data.add(load_event_csv(file, event_id, label));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir,
                  const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  char buf[64];
  for (const auto& ev : data.events) {
    const std::string filename = ev.event_id + ".csv";
    std::ofstream out(dir / filename, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write " + (dir / filename).string());
    }
    out << "timestamp_s,angle_deg\n";
    for (std::size_t k = 0; k < ev.samples.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(k) / ev.sample_rate_hz);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", ev.samples[k]);
      out << buf << '\n';
    }
    manifest.push_back({{"path", filename},
                        {"label", to_string(ev.label)},
                        {"event_id", ev.event_id}});
  }
  std::ofstream mout(dir / manifest_name, std::ios::binary);
  mout << manifest.dump(2) << '\n';
}

std::size_t floor_count(double x) {
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

TimeSeriesEvent truncate_window(const TimeSeriesEvent& event, double seconds) {
  if (!(seconds > 0.0)) {
    throw std::invalid_argument("truncate_window: seconds must be positive");
  }
  const std::size_t want = floor_count(seconds * event.sample_rate_hz);
  if (want > event.samples.size()) {
    throw std::invalid_argument(
        "truncate_window: requested " + std::to_string(want) + " samples but event " +
        event.event_id + " has " + std::to_string(event.samples.size()));
  }
  TimeSeriesEvent out = event;
  out.samples.resize(want);
  return out;
}

SplitResult stratified_split(const Dataset& data, double fraction,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: fraction must lie in (0,1)");
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (data.class_counts[c] < 2) {
      throw std::invalid_argument(std::string("stratified_split: class ") +
                                  to_string(kAllLabels[c]) +
                                  " needs at least 2 events");
    }
  }

  SplitResult result;
  result.fraction = fraction;
  result.seed = seed;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.events.size(); ++i) {
      if (static_cast<int>(data.events[i].label) == c) idx.push_back(i);
    }
    Rng rng(derive_stream(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    const std::size_t n_train = floor_count(fraction * static_cast<double>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_train ? result.train : result.test).add(data.events[idx[k]]);
    }
  }
  return result;
}

}  // namespace gridgaf
