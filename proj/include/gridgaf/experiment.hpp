#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridgaf/baselines.hpp"
#include "gridgaf/data_model.hpp"
#include "gridgaf/models.hpp"
#include "gridgaf/synth.hpp"
#include "json.hpp"

namespace gridgaf {

// enumeration order is the canonical (alphabetical) report order
enum class ModelKind : int { Cnn = 0, Dt = 1, Lstm = 2, Rnn = 3, Svm = 4 };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct SplitFraction {
  double value = 0.0;
  std::string label;  // "2/3", "0.7", ...

  static SplitFraction parse(const std::string& text);  // "p/q" or decimal
  static SplitFraction from_value(double v);
};

struct CnnHyper {
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;
  Activation activation = Activation::Relu;
};

struct RnnHyper {
  std::size_t hidden_units = 128;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  double learning_rate = 0.001;
};

struct LstmHyper {
  std::size_t hidden_units = 64;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double learning_rate = 0.001;
};

struct SynthSpec {
  GeneratorConfig generator;
  std::array<std::size_t, kNumClasses> counts{142, 145, 87};
};

struct ExperimentConfig {
  std::string manifest;  // empty: generate synthetic data from `synth`
  SynthSpec synth;
  double window_s = 30.0;
  std::size_t image_size = 64;
  std::vector<ModelKind> models = {ModelKind::Cnn, ModelKind::Dt,
                                   ModelKind::Lstm, ModelKind::Rnn,
                                   ModelKind::Svm};
  std::vector<SplitFraction> fractions;  // default 2/3, 3/4, 4/5
  CnnHyper cnn;
  RnnHyper rnn;
  LstmHyper lstm;
  DtConfig dt;
  SvmConfig svm;
  FeatureMode baseline_features = FeatureMode::RawSeries;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool export_images = false;

  ExperimentConfig();
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Per-event representations computed once and shared by every cell.
struct PreparedData {
  std::vector<int> labels;
  std::vector<std::string> event_ids;
  std::vector<Tensor> images;                 // GAF [S,S]
  std::vector<std::vector<double>> features;  // baseline features
  std::size_t size() const { return labels.size(); }
};

PreparedData prepare_data(const Dataset& data, double window_s,
                          std::size_t image_size, FeatureMode baseline_mode);

struct DataView {
  const PreparedData* data = nullptr;
  std::vector<std::size_t> indices;
  std::size_t size() const { return indices.size(); }
};

struct EpochStat {
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStat> trace;
  std::size_t epochs_run = 0;
  std::optional<std::size_t> epochs_to_95pct_train;  // 1-based
};

using Predictor = std::function<int(const PreparedData&, std::size_t)>;

struct FitResult {
  TrainResult train;
  Predictor predict;
  nn::Checkpoint checkpoint;
};

// Exactly `epochs` seeded-shuffle passes for the neural kinds (SGD+momentum
// for the CNN, Adam for RNN/LSTM); single fit for DT/SVM. A non-finite loss
// aborts with a diagnostic.
FitResult train_model(ModelKind kind, const ExperimentConfig& cfg,
                      const DataView& train, std::uint64_t cell_seed);

struct EvalResult {
  double accuracy = 0.0;
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
};

EvalResult evaluate(const Predictor& predict, const DataView& data);

struct CellReport {
  ModelKind model = ModelKind::Cnn;
  SplitFraction fraction;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  EvalResult test_eval;
  std::size_t epochs_run = 0;
  std::optional<std::size_t> epochs_to_95pct_train;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  nlohmann::json config_echo;
  std::vector<CellReport> cells;  // sorted by (model name, fraction)

  nlohmann::json to_json() const;
};

// The full protocol: split / encode / train / evaluate per (model, fraction);
// writes report.json (plus PGM exports when configured) into cfg.out_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Dataset resolution used by run_experiment and the CLI `train`/`evaluate`.
Dataset resolve_dataset(const ExperimentConfig& cfg);

}  // namespace gridgaf
