#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gridgaf/experiment.hpp"
#include "test_util.hpp"

using namespace gridgaf;
namespace fs = std::filesystem;

namespace {

// small, fast configuration used throughout this suite
ExperimentConfig small_cfg(const std::string& out_name) {
  ExperimentConfig cfg;
  cfg.synth.counts = {8, 8, 8};
  cfg.synth.generator.duration_s = 40.0;
  cfg.image_size = 16;
  cfg.window_s = 30.0;
  cfg.cnn.epochs = 2;
  cfg.rnn.epochs = 2;
  cfg.lstm.epochs = 2;
  cfg.rnn.hidden_units = 8;
  cfg.lstm.hidden_units = 8;
  cfg.fractions = {SplitFraction::parse("1/2")};
  cfg.seed = 99;
  cfg.out_dir = (fs::temp_directory_path() / out_name).string();
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("fraction parsing handles rationals and decimals") {
  CHECK(SplitFraction::parse("2/3").value == doctest::Approx(2.0 / 3.0));
  CHECK(SplitFraction::parse("2/3").label == "2/3");
  CHECK(SplitFraction::parse("0.75").value == 0.75);
  CHECK(SplitFraction::from_value(0.8).label == "4/5");
  CHECK_THROWS(SplitFraction::parse("5/4"));
  CHECK_THROWS(SplitFraction::parse("0"));
}

TEST_CASE("config json round-trip keeps defaults and overrides") {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "models": ["dt", "svm"],
    "fractions": ["2/3"],
    "cnn": {"epochs": 7},
    "svm": {"gamma": 0.05},
    "seed": 42
  })");
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  CHECK(cfg.models == std::vector<ModelKind>{ModelKind::Dt, ModelKind::Svm});
  CHECK(cfg.cnn.epochs == 7);
  CHECK(cfg.cnn.batch_size == 64);           
  CHECK(cfg.cnn.learning_rate == 0.01);      
  CHECK(cfg.cnn.momentum == 0.9);            
  CHECK(cfg.rnn.hidden_units == 128);        
  CHECK(cfg.rnn.epochs == 50);
  CHECK(cfg.rnn.learning_rate == 0.001);
  CHECK(cfg.lstm.hidden_units == 64);
  CHECK(cfg.lstm.epochs == 30);
  CHECK(cfg.svm.gamma == 0.05);
  CHECK(cfg.svm.c == 1.0);
  CHECK(cfg.dt.min_samples_split == 2);
  CHECK(cfg.dt.min_samples_leaf == 1);
  CHECK(cfg.seed == 42);

  const ExperimentConfig echo = ExperimentConfig::from_json(cfg.to_json());
  CHECK(echo.to_json() == cfg.to_json());

  CHECK_THROWS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"models":[]})")));
}

TEST_CASE("epochs=0 returns the initialization untouched with an empty trace") {
  ExperimentConfig cfg = small_cfg("gridgaf_e0");
  cfg.lstm.epochs = 0;
  const Dataset data = resolve_dataset(cfg);
  const PreparedData prepared =
      prepare_data(data, cfg.window_s, cfg.image_size, cfg.baseline_features);
  DataView all{&prepared, {}};
  for (std::size_t i = 0; i < prepared.size(); ++i) all.indices.push_back(i);

  const FitResult fit = train_model(ModelKind::Lstm, cfg, all, 7);
  CHECK(fit.train.trace.empty());
  CHECK(fit.train.epochs_run == 0);
  CHECK_FALSE(fit.train.epochs_to_95pct_train.has_value());

  // parameters equal a freshly initialized net with the same stream
  LstmConfig mc;
  mc.input_size = cfg.image_size;
  mc.hidden_units = cfg.lstm.hidden_units;
  LstmNet fresh(mc, derive_stream(7, 0x04));
  const auto fresh_ckpt = fresh.to_checkpoint();
  REQUIRE(fit.checkpoint.blocks.size() == fresh_ckpt.blocks.size());
  for (std::size_t b = 0; b < fresh_ckpt.blocks.size(); ++b) {
    CHECK(fit.checkpoint.blocks[b].f64 == fresh_ckpt.blocks[b].f64);
  }
}

TEST_CASE("training twice with one seed is bitwise identical; evaluation is self-consistent") {
  ExperimentConfig cfg = small_cfg("gridgaf_det");
  const Dataset data = resolve_dataset(cfg);
  const PreparedData prepared =
      prepare_data(data, cfg.window_s, cfg.image_size, cfg.baseline_features);
  DataView all{&prepared, {}};
  for (std::size_t i = 0; i < prepared.size(); ++i) all.indices.push_back(i);

  const FitResult a = train_model(ModelKind::Rnn, cfg, all, 123);
  const FitResult b = train_model(ModelKind::Rnn, cfg, all, 123);
  REQUIRE(a.checkpoint.blocks.size() == b.checkpoint.blocks.size());
  for (std::size_t i = 0; i < a.checkpoint.blocks.size(); ++i) {
    CHECK(a.checkpoint.blocks[i].f64 == b.checkpoint.blocks[i].f64);
  }

  const EvalResult ev = evaluate(a.predict, all);
  std::size_t total = 0, trace = 0;
  for (int r = 0; r < kNumClasses; ++r) {
    for (int c = 0; c < kNumClasses; ++c) {
      total += ev.confusion[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    trace += ev.confusion[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
  }
  CHECK(total == all.size());
  CHECK(ev.accuracy ==
        doctest::Approx(static_cast<double>(trace) / static_cast<double>(total))
            .epsilon(1e-12));
}

TEST_CASE("dt-only experiment emits exactly one cell; report is self-consistent") {
  ExperimentConfig cfg = small_cfg("gridgaf_dtonly");
  cfg.models = {ModelKind::Dt};
  const ExperimentReport report = run_experiment(cfg);
  REQUIRE(report.cells.size() == 1);
  const auto& cell = report.cells[0];
  CHECK(cell.model == ModelKind::Dt);
  CHECK(cell.epochs_run == 0);

  std::size_t total = 0, trace = 0;
  for (int r = 0; r < kNumClasses; ++r) {
    std::size_t row_sum = 0;
    for (int c = 0; c < kNumClasses; ++c) {
      row_sum += cell.test_eval.confusion[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    // 8 events per class at fraction 1/2: 4 land in every test row
    CHECK(row_sum == 4);
    total += row_sum;
    trace += cell.test_eval.confusion[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
  }
  CHECK(cell.test_accuracy ==
        doctest::Approx(static_cast<double>(trace) / static_cast<double>(total))
            .epsilon(1e-12));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "report.json"));
}

TEST_CASE("full default model set yields models x fractions cells in canonical order") {
  ExperimentConfig cfg = small_cfg("gridgaf_allcells");
  cfg.fractions = {SplitFraction::parse("1/2"), SplitFraction::parse("2/3")};
  const ExperimentReport report = run_experiment(cfg);
  REQUIRE(report.cells.size() == 5 * 2);
  const char* expect_order[] = {"cnn", "cnn", "dt", "dt", "lstm",
                                "lstm", "rnn", "rnn", "svm", "svm"};
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    CHECK(std::string(to_string(report.cells[i].model)) == expect_order[i]);
  }
  CHECK(report.cells[0].fraction.label == "1/2");
  CHECK(report.cells[1].fraction.label == "2/3");
}

TEST_CASE("report json is byte-identical across runs once wall times are masked") {
  ExperimentConfig cfg = small_cfg("gridgaf_repro");
  cfg.models = {ModelKind::Dt, ModelKind::Lstm};
  auto masked_dump = [&] {
    const ExperimentReport report = run_experiment(cfg);
    nlohmann::json j = report.to_json();
    for (auto& cell : j.at("cells")) cell["wall_time_s"] = 0.0;
    return j.dump(2);
  };
  CHECK(masked_dump() == masked_dump());
}

TEST_CASE("evaluate rejects an empty view") {
  ExperimentConfig cfg = small_cfg("gridgaf_empty");
  PreparedData prepared;
  DataView empty{&prepared, {}};
  CHECK_THROWS(evaluate([](const PreparedData&, std::size_t) { return 0; }, empty));
}

}  // TEST_SUITE
