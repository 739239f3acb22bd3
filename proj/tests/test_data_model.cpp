#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "gridgaf/data_model.hpp"
#include "gridgaf/rng.hpp"
#include "gridgaf/synth.hpp"

using namespace gridgaf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gridgaf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset tiny_dataset(std::size_t per_class, std::uint64_t seed = 5) {
  GeneratorConfig cfg;
  cfg.duration_s = 6.0;  // 60 samples
  cfg.event_onset_s = 1.0;
  cfg.seed = seed;
  return build_dataset(cfg, {per_class, per_class, per_class});
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("label strings round-trip and unknown labels are rejected") {
  for (Label l : kAllLabels) {
    CHECK(label_from_string(to_string(l)) == l);
  }
  CHECK_THROWS(label_from_string("line_trip"));
}

TEST_CASE("manifest with one event per class yields unit class counts") {
  const auto dir = temp_dir("load3");
  Dataset data = tiny_dataset(1);
  save_dataset(data, dir);
  const Dataset loaded = load_events(dir / "manifest.json");
  CHECK(loaded.size() == 3);
  CHECK(loaded.class_counts == std::array<std::size_t, 3>{1, 1, 1});
  loaded.validate();
}

TEST_CASE("374-entry manifest yields the reference class composition") {
  const auto dir = temp_dir("full374");
  GeneratorConfig gen;
  gen.duration_s = 2.0;  // short series keep the file set small
  gen.seed = 11;
  save_dataset(build_dataset(gen, {142, 145, 87}), dir);
  const Dataset loaded = load_events(dir / "manifest.json");
  CHECK(loaded.size() == 374);
  CHECK(loaded.class_counts == std::array<std::size_t, 3>{142, 145, 87});
  loaded.validate();
}

TEST_CASE("save then load reproduces samples bit-for-bit") {
  const auto dir = temp_dir("roundtrip");
  Dataset data = tiny_dataset(2, 17);
  save_dataset(data, dir);
  const Dataset loaded = load_events(dir / "manifest.json");
  REQUIRE(loaded.size() == data.size());
  // save_dataset writes per class in order; ids match by position here
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& a = data.events[i];
    const auto& b = loaded.events[i];
    CHECK(a.event_id == b.event_id);
    CHECK(a.label == b.label);
    CHECK(a.sample_rate_hz == b.sample_rate_hz);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
      CHECK(a.samples[k] == b.samples[k]);  // exact
    }
  }
}

TEST_CASE("malformed angle cell reports file and line") {
  const auto dir = temp_dir("malformed");
  {
    std::ofstream out(dir / "bad.csv");
    out << "timestamp_s,angle_deg\n0,1.0\n0.1,oops\n";
    std::ofstream m(dir / "manifest.json");
    m << R"([{"path":"bad.csv","label":"oscillation","event_id":"b1"}])";
  }
  try {
    load_events(dir / "manifest.json");
    FAIL("expected malformed-row error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.csv") != std::string::npos);
    CHECK(msg.find(":3") != std::string::npos);  // line number
  }
}

TEST_CASE("missing file and duplicate ids are rejected") {
  const auto dir = temp_dir("missing");
  {
    std::ofstream m(dir / "manifest.json");
    m << R"([{"path":"ghost.csv","label":"oscillation","event_id":"g"}])";
  }
  CHECK_THROWS_WITH_AS(load_events(dir / "manifest.json"),
                       doctest::Contains("ghost.csv"), std::runtime_error);

  {
    std::ofstream c(dir / "a.csv");
    c << "timestamp_s,angle_deg\n0,1\n0.1,2\n";
    std::ofstream m(dir / "manifest.json");
    m << R"([{"path":"a.csv","label":"oscillation","event_id":"dup"},)"
      << R"({"path":"a.csv","label":"oscillation","event_id":"dup"}])";
  }
  CHECK_THROWS_WITH_AS(load_events(dir / "manifest.json"),
                       doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("unknown label string in manifest is rejected") {
  const auto dir = temp_dir("unknown_label");
  {
    std::ofstream c(dir / "a.csv");
    c << "timestamp_s,angle_deg\n0,1\n0.1,2\n";
    std::ofstream m(dir / "manifest.json");
    m << R"([{"path":"a.csv","label":"blackout","event_id":"x"}])";
  }
  CHECK_THROWS_WITH_AS(load_events(dir / "manifest.json"),
                       doctest::Contains("unknown label"), std::runtime_error);
}

TEST_CASE("truncate_window basic cases") {
  TimeSeriesEvent ev;
  ev.event_id = "e";
  ev.sample_rate_hz = 10.0;
  ev.samples.assign(600, 1.0);
  CHECK(truncate_window(ev, 30.0).samples.size() == 300);
  CHECK(truncate_window(ev, 60.0).samples.size() == 600);  // identity
  CHECK(truncate_window(ev, 60.0).event_id == "e");
  CHECK_THROWS(truncate_window(ev, 61.0));
}

TEST_CASE("stratified split matches the floor arithmetic of the protocol") {
  Dataset data;
  std::size_t n = 0;
  const std::array<std::size_t, 3> counts{142, 145, 87};
  for (int c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(c)]; ++k) {
      TimeSeriesEvent ev;
      ev.event_id = "ev" + std::to_string(n++);
      ev.label = kAllLabels[c];
      ev.samples = {0.0, 1.0};
      data.add(ev);
    }
  }
  SUBCASE("2/3") {
    const SplitResult s = stratified_split(data, 2.0 / 3.0, 7);
    CHECK(s.train.class_counts == std::array<std::size_t, 3>{94, 96, 58});
    CHECK(s.train.size() == 248);
    CHECK(s.test.size() == 126);
  }
  SUBCASE("3/4") {
    const SplitResult s = stratified_split(data, 0.75, 7);
    CHECK(s.train.class_counts == std::array<std::size_t, 3>{106, 108, 65});
  }
  SUBCASE("4/5") {
    const SplitResult s = stratified_split(data, 0.8, 7);
    CHECK(s.train.class_counts == std::array<std::size_t, 3>{113, 116, 69});
    CHECK(s.train.size() == 298);
  }
}

TEST_CASE("splits are seed-deterministic, disjoint, and cover the input") {
  Dataset data = tiny_dataset(8);
  for (const double f : {2.0 / 3.0, 0.75, 0.8}) {
    for (const std::uint64_t seed : {0ULL, 1ULL, 42ULL}) {
      const SplitResult a = stratified_split(data, f, seed);
      const SplitResult b = stratified_split(data, f, seed);
      std::set<std::string> train_ids, test_ids, all_ids;
      for (const auto& ev : a.train.events) train_ids.insert(ev.event_id);
      for (const auto& ev : a.test.events) test_ids.insert(ev.event_id);
      for (const auto& ev : data.events) all_ids.insert(ev.event_id);

      std::set<std::string> b_train_ids;
      for (const auto& ev : b.train.events) b_train_ids.insert(ev.event_id);
      CHECK(train_ids == b_train_ids);

      std::set<std::string> unioned = train_ids;
      unioned.insert(test_ids.begin(), test_ids.end());
      CHECK(unioned == all_ids);
      CHECK(train_ids.size() + test_ids.size() == all_ids.size());
    }
  }
}

TEST_CASE("different seeds give different train sets") {
  Dataset data = tiny_dataset(10);
  const SplitResult a = stratified_split(data, 0.5, 1);
  const SplitResult b = stratified_split(data, 0.5, 2);
  std::set<std::string> ia, ib;
  for (const auto& ev : a.train.events) ia.insert(ev.event_id);
  for (const auto& ev : b.train.events) ib.insert(ev.event_id);
  CHECK(ia != ib);
}

TEST_CASE("split rejects bad fractions and tiny classes") {
  Dataset data = tiny_dataset(1);
  CHECK_THROWS(stratified_split(data, 0.5, 0));  // classes of size 1
  Dataset ok = tiny_dataset(3);
  CHECK_THROWS(stratified_split(ok, 0.0, 0));
  CHECK_THROWS(stratified_split(ok, 1.0, 0));
}

TEST_CASE("dataset validate catches count drift and duplicate ids") {
  Dataset data = tiny_dataset(2);
  data.validate();
  Dataset broken = data;
  broken.class_counts[0]++;
  CHECK_THROWS(broken.validate());
  Dataset dup = data;
  auto ev = dup.events[0];
  dup.add(ev);
  CHECK_THROWS(dup.validate());
}

}  // TEST_SUITE
