#include "gridgaf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "gridgaf/gaf.hpp"
#include "gridgaf/kernels.hpp"
#include "gridgaf/rng.hpp"

namespace gridgaf {

namespace {
// substream tags
constexpr std::uint64_t kStreamSynth = 0x01;
constexpr std::uint64_t kStreamSplit = 0x02;
constexpr std::uint64_t kStreamCell = 0x03;
constexpr std::uint64_t kStreamInit = 0x04;
constexpr std::uint64_t kStreamEpoch = 0x05;
}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Dt: return "dt";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Rnn: return "rnn";
    case ModelKind::Svm: return "svm";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "cnn") return ModelKind::Cnn;
  if (s == "dt") return ModelKind::Dt;
  if (s == "lstm") return ModelKind::Lstm;
  if (s == "rnn") return ModelKind::Rnn;
  if (s == "svm") return ModelKind::Svm;
  throw std::runtime_error("unknown model kind: " + s);
}

SplitFraction SplitFraction::parse(const std::string& text) {
  const auto slash = text.find('/');
  SplitFraction f;
  if (slash != std::string::npos) {
    const double num = std::stod(text.substr(0, slash));
    const double den = std::stod(text.substr(slash + 1));
    if (!(den > 0.0)) throw std::invalid_argument("bad fraction: " + text);
    f.value = num / den;
    f.label = text;
  } else {
    f.value = std::stod(text);
    f.label = text;
  }
  if (!(f.value > 0.0 && f.value < 1.0)) {
    throw std::invalid_argument("fraction must lie in (0,1): " + text);
  }
  return f;
}

SplitFraction SplitFraction::from_value(double v) {
  SplitFraction f;
  f.value = v;
  const std::pair<double, const char*> known[] = {
      {2.0 / 3.0, "2/3"}, {3.0 / 4.0, "3/4"}, {4.0 / 5.0, "4/5"}};
  for (const auto& [kv, kl] : known) {
    if (std::abs(v - kv) < 1e-12) {
      f.label = kl;
      return f;
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  f.label = buf;
  return f;
}

ExperimentConfig::ExperimentConfig() {
  fractions = {SplitFraction::parse("2/3"), SplitFraction::parse("3/4"),
               SplitFraction::parse("4/5")};
}

// ---- config json ----

namespace {

Range range_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw std::runtime_error("range must be a [min, max] array");
  }
  return Range{j.at(0).get<double>(), j.at(1).get<double>()};
}

nlohmann::json range_to_json(const Range& r) {
  return nlohmann::json::array({r.lo, r.hi});
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_range(const nlohmann::json& j, const char* key, Range& out) {
  if (j.contains(key)) out = range_from_json(j.at(key));
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  maybe(j, "manifest", cfg.manifest);
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    if (s.contains("counts")) {
      const auto& c = s.at("counts");
      if (!c.is_array() || c.size() != kNumClasses) {
        throw std::runtime_error("synth.counts must have one entry per class");
      }
      for (int i = 0; i < kNumClasses; ++i) {
        cfg.synth.counts[static_cast<std::size_t>(i)] = c.at(i).get<std::size_t>();
      }
    }
    auto& g = cfg.synth.generator;
    maybe(s, "sample_rate_hz", g.sample_rate_hz);
    maybe(s, "duration_s", g.duration_s);
    maybe(s, "noise_sigma_deg", g.noise_sigma_deg);
    maybe(s, "event_onset_s", g.event_onset_s);
    maybe_range(s, "base_angle_deg", g.base_angle_deg);
    maybe_range(s, "step_amplitude_deg", g.step_amplitude_deg);
    maybe_range(s, "time_constant_s", g.time_constant_s);
    maybe_range(s, "osc_freq_hz", g.osc_freq_hz);
    maybe_range(s, "osc_damping", g.osc_damping);
    maybe_range(s, "osc_amplitude_deg", g.osc_amplitude_deg);
    maybe_range(s, "osc_phase_rad", g.osc_phase_rad);
  }
  maybe(j, "window_s", cfg.window_s);
  maybe(j, "image_size", cfg.image_size);
  if (j.contains("models")) {
    cfg.models.clear();
    for (const auto& m : j.at("models")) {
      cfg.models.push_back(model_kind_from_string(m.get<std::string>()));
    }
  }
  if (j.contains("fractions")) {
    cfg.fractions.clear();
    for (const auto& f : j.at("fractions")) {
      if (f.is_string()) {
        cfg.fractions.push_back(SplitFraction::parse(f.get<std::string>()));
      } else {
        cfg.fractions.push_back(SplitFraction::from_value(f.get<double>()));
      }
    }
  }
  if (j.contains("cnn")) {
    const auto& c = j.at("cnn");
    maybe(c, "batch_size", cfg.cnn.batch_size);
    maybe(c, "epochs", cfg.cnn.epochs);
    maybe(c, "learning_rate", cfg.cnn.learning_rate);
    maybe(c, "momentum", cfg.cnn.momentum);
    if (c.contains("activation")) {
      cfg.cnn.activation =
          activation_from_string(c.at("activation").get<std::string>());
    }
  }
  if (j.contains("rnn")) {
    const auto& c = j.at("rnn");
    maybe(c, "hidden_units", cfg.rnn.hidden_units);
    maybe(c, "batch_size", cfg.rnn.batch_size);
    maybe(c, "epochs", cfg.rnn.epochs);
    maybe(c, "learning_rate", cfg.rnn.learning_rate);
  }
  if (j.contains("lstm")) {
    const auto& c = j.at("lstm");
    maybe(c, "hidden_units", cfg.lstm.hidden_units);
    maybe(c, "batch_size", cfg.lstm.batch_size);
    maybe(c, "epochs", cfg.lstm.epochs);
    maybe(c, "learning_rate", cfg.lstm.learning_rate);
  }
  if (j.contains("dt")) {
    const auto& c = j.at("dt");
    maybe(c, "min_samples_split", cfg.dt.min_samples_split);
    maybe(c, "min_samples_leaf", cfg.dt.min_samples_leaf);
    if (c.contains("max_depth") && !c.at("max_depth").is_null()) {
      cfg.dt.max_depth = c.at("max_depth").get<int>();
    }
  }
  if (j.contains("svm")) {
    const auto& c = j.at("svm");
    maybe(c, "c", cfg.svm.c);
    maybe(c, "gamma", cfg.svm.gamma);
    maybe(c, "tolerance", cfg.svm.tolerance);
    maybe(c, "max_passes", cfg.svm.max_passes);
  }
  if (j.contains("baseline_features")) {
    cfg.baseline_features =
        feature_mode_from_string(j.at("baseline_features").get<std::string>());
  }
  maybe(j, "seed", cfg.seed);
  maybe(j, "out_dir", cfg.out_dir);
  maybe(j, "export_images", cfg.export_images);
  if (cfg.models.empty()) {
    throw std::runtime_error("config: at least one model must be selected");
  }
  if (cfg.fractions.empty()) {
    throw std::runtime_error("config: at least one split fraction required");
  }
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  if (!manifest.empty()) j["manifest"] = manifest;
  const auto& g = synth.generator;
  j["synth"] = {
      {"counts", synth.counts},
      {"sample_rate_hz", g.sample_rate_hz},
      {"duration_s", g.duration_s},
      {"noise_sigma_deg", g.noise_sigma_deg},
      {"event_onset_s", g.event_onset_s},
      {"base_angle_deg", range_to_json(g.base_angle_deg)},
      {"step_amplitude_deg", range_to_json(g.step_amplitude_deg)},
      {"time_constant_s", range_to_json(g.time_constant_s)},
      {"osc_freq_hz", range_to_json(g.osc_freq_hz)},
      {"osc_damping", range_to_json(g.osc_damping)},
      {"osc_amplitude_deg", range_to_json(g.osc_amplitude_deg)},
      {"osc_phase_rad", range_to_json(g.osc_phase_rad)},
  };
  j["window_s"] = window_s;
  j["image_size"] = image_size;
  nlohmann::json jm = nlohmann::json::array();
  for (ModelKind m : models) jm.push_back(to_string(m));
  j["models"] = jm;
  nlohmann::json jf = nlohmann::json::array();
  for (const auto& f : fractions) jf.push_back(f.label);
  j["fractions"] = jf;
  j["cnn"] = {{"batch_size", cnn.batch_size},
              {"epochs", cnn.epochs},
              {"learning_rate", cnn.learning_rate},
              {"momentum", cnn.momentum},
              {"activation", to_string(cnn.activation)}};
  j["rnn"] = {{"hidden_units", rnn.hidden_units},
              {"batch_size", rnn.batch_size},
              {"epochs", rnn.epochs},
              {"learning_rate", rnn.learning_rate}};
  j["lstm"] = {{"hidden_units", lstm.hidden_units},
               {"batch_size", lstm.batch_size},
               {"epochs", lstm.epochs},
               {"learning_rate", lstm.learning_rate}};
  j["dt"] = {{"min_samples_split", dt.min_samples_split},
             {"min_samples_leaf", dt.min_samples_leaf},
             {"max_depth", dt.max_depth < 0 ? nlohmann::json(nullptr)
                                            : nlohmann::json(dt.max_depth)}};
  j["svm"] = {{"c", svm.c},
              {"gamma", svm.gamma},
              {"tolerance", svm.tolerance},
              {"max_passes", svm.max_passes}};
  j["baseline_features"] = to_string(baseline_features);
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["export_images"] = export_images;
  return j;
}

// ---- data preparation ----

Dataset resolve_dataset(const ExperimentConfig& cfg) {
  if (!cfg.manifest.empty()) {
    return load_events(cfg.manifest);
  }
  GeneratorConfig g = cfg.synth.generator;
  g.seed = derive_stream(cfg.seed, kStreamSynth);
  return build_dataset(g, cfg.synth.counts);
}

PreparedData prepare_data(const Dataset& data, double window_s,
                          std::size_t image_size, FeatureMode baseline_mode) {
  PreparedData out;
  out.labels.reserve(data.size());
  for (const auto& ev : data.events) {
    out.labels.push_back(static_cast<int>(ev.label));
    out.event_ids.push_back(ev.event_id);
    out.images.push_back(encode_event(ev, window_s, image_size).to_tensor());
    out.features.push_back(featurize(ev, baseline_mode, window_s, image_size));
  }
  return out;
}

// ---- training ----

namespace {

FitResult train_neural(ModelKind kind, const ExperimentConfig& cfg,
                       const DataView& train, std::uint64_t cell_seed) {
  const PreparedData& data = *train.data;
  std::unique_ptr<NeuralNet> net;
  nn::OptimizerConfig opt_cfg;
  std::size_t epochs = 0, batch_size = 0;
  const std::uint64_t init_seed = derive_stream(cell_seed, kStreamInit);
  if (kind == ModelKind::Cnn) {
    LeNetConfig mc;
    mc.input_size = cfg.image_size;
    mc.hidden_activation = cfg.cnn.activation;
    net = std::make_unique<LeNet>(mc, init_seed);
    opt_cfg.kind = nn::OptKind::SgdMomentum;
    opt_cfg.learning_rate = cfg.cnn.learning_rate;
    opt_cfg.momentum = cfg.cnn.momentum;
    epochs = cfg.cnn.epochs;
    batch_size = cfg.cnn.batch_size;
  } else if (kind == ModelKind::Rnn) {
    RnnConfig mc;
    mc.input_size = cfg.image_size;
    mc.hidden_units = cfg.rnn.hidden_units;
    net = std::make_unique<RnnNet>(mc, init_seed);
    opt_cfg.kind = nn::OptKind::Adam;
    opt_cfg.learning_rate = cfg.rnn.learning_rate;
    epochs = cfg.rnn.epochs;
    batch_size = cfg.rnn.batch_size;
  } else {
    LstmConfig mc;
    mc.input_size = cfg.image_size;
    mc.hidden_units = cfg.lstm.hidden_units;
    net = std::make_unique<LstmNet>(mc, init_seed);
    opt_cfg.kind = nn::OptKind::Adam;
    opt_cfg.learning_rate = cfg.lstm.learning_rate;
    epochs = cfg.lstm.epochs;
    batch_size = cfg.lstm.batch_size;
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");

  nn::Optimizer optimizer(opt_cfg);
  FitResult fit;

  std::vector<std::size_t> order = train.indices;
  Tensor grad_logits({static_cast<std::size_t>(kNumClasses)});
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    Rng shuffle_rng(derive_stream(cell_seed, kStreamEpoch, epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      nn::zero_grads(net->params());
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const Tensor& logits = net->forward(data.images[idx]);
        const double loss =
            nn::softmax_xent_loss(logits, data.labels[idx], grad_logits);
        if (!std::isfinite(loss)) {
          throw std::runtime_error("non-finite loss while training " +
                                   std::string(to_string(kind)) + " at epoch " +
                                   std::to_string(epoch));
        }
        loss_sum += loss;
        if (predict_class(logits) == data.labels[idx]) ++correct;
        kern::scale(inv_batch, grad_logits.data(), grad_logits.numel());
        net->backward(grad_logits);
      }
      optimizer.step(net->params());
    }
    EpochStat stat;
    stat.mean_loss = loss_sum / static_cast<double>(order.size());
    stat.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(order.size());
    fit.train.trace.push_back(stat);
    if (!fit.train.epochs_to_95pct_train && stat.train_accuracy >= 0.95) {
      fit.train.epochs_to_95pct_train = epoch;
    }
  }
  fit.train.epochs_run = epochs;
  fit.checkpoint = net->to_checkpoint();

  std::shared_ptr<NeuralNet> shared_net(std::move(net));
  fit.predict = [shared_net](const PreparedData& d, std::size_t i) {
    return predict_class(shared_net->forward(d.images[i]));
  };
  return fit;
}

FitResult train_baseline(ModelKind kind, const ExperimentConfig& cfg,
                         const DataView& train) {
  const PreparedData& data = *train.data;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(train.size());
  for (std::size_t idx : train.indices) {
    x.push_back(data.features[idx]);
    y.push_back(data.labels[idx]);
  }
  FitResult fit;
  if (kind == ModelKind::Dt) {
    auto tree = std::make_shared<DecisionTree>(
        DecisionTree::fit(x, y, cfg.dt, kNumClasses));
    fit.checkpoint = tree->to_checkpoint();
    fit.predict = [tree](const PreparedData& d, std::size_t i) {
      return tree->predict(d.features[i]);
    };
  } else {
    auto svm = std::make_shared<SvmMulticlass>(
        SvmMulticlass::fit(x, y, cfg.svm, kNumClasses));
    fit.checkpoint = svm->to_checkpoint();
    fit.predict = [svm](const PreparedData& d, std::size_t i) {
      return svm->predict(d.features[i]);
    };
  }
  // record how the feature vectors were built so `evaluate` can rebuild them
  nlohmann::json meta = nlohmann::json::parse(fit.checkpoint.meta_json);
  meta["feature_mode"] = to_string(cfg.baseline_features);
  meta["window_s"] = cfg.window_s;
  meta["feature_length"] = cfg.image_size;
  fit.checkpoint.meta_json = meta.dump();
  return fit;
}

}  // namespace

FitResult train_model(ModelKind kind, const ExperimentConfig& cfg,
                      const DataView& train, std::uint64_t cell_seed) {
  if (train.size() == 0) {
    throw std::invalid_argument("train_model: empty training set");
  }
  if (kind == ModelKind::Dt || kind == ModelKind::Svm) {
    return train_baseline(kind, cfg, train);
  }
  return train_neural(kind, cfg, train, cell_seed);
}

EvalResult evaluate(const Predictor& predict, const DataView& data) {
  if (data.size() == 0) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  EvalResult r;
  for (std::size_t idx : data.indices) {
    const int truth = data.data->labels[idx];
    const int guess = predict(*data.data, idx);
    r.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(guess)]++;
  }
  std::size_t trace = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    trace += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(data.size());
  return r;
}

// ---- full protocol ----

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["config"] = config_echo;
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json jc;
    jc["model"] = to_string(c.model);
    jc["fraction"] = c.fraction.label;
    jc["fraction_value"] = c.fraction.value;
    jc["train_accuracy"] = c.train_accuracy;
    jc["test_accuracy"] = c.test_accuracy;
    nlohmann::json conf = nlohmann::json::array();
    for (const auto& row : c.test_eval.confusion) {
      conf.push_back(row);
    }
    jc["confusion_matrix"] = conf;
    jc["epochs_run"] = c.epochs_run;
    jc["epochs_to_95pct_train"] =
        c.epochs_to_95pct_train ? nlohmann::json(*c.epochs_to_95pct_train)
                                : nlohmann::json(nullptr);
    jc["wall_time_s"] = c.wall_time_s;
    jc["seed"] = c.seed;
    cells_json.push_back(std::move(jc));
  }
  j["cells"] = cells_json;
  return j;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const Dataset dataset = resolve_dataset(cfg);
  dataset.validate();
  const PreparedData prepared = prepare_data(dataset, cfg.window_s,
                                             cfg.image_size,
                                             cfg.baseline_features);
  std::unordered_map<std::string, std::size_t> id_to_index;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    id_to_index[prepared.event_ids[i]] = i;
  }

  // one split per fraction, shared by every model
  std::vector<std::pair<DataView, DataView>> splits;
  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
    const SplitResult split = stratified_split(
        dataset, cfg.fractions[fi].value, derive_stream(cfg.seed, kStreamSplit, fi));
    DataView train{&prepared, {}}, test{&prepared, {}};
    for (const auto& ev : split.train.events) {
      train.indices.push_back(id_to_index.at(ev.event_id));
    }
    for (const auto& ev : split.test.events) {
      test.indices.push_back(id_to_index.at(ev.event_id));
    }
    splits.emplace_back(std::move(train), std::move(test));
  }

  // canonical cell order: model name, then fraction
  std::vector<ModelKind> models = cfg.models;
  std::sort(models.begin(), models.end());
  models.erase(std::unique(models.begin(), models.end()), models.end());

  ExperimentReport report;
  report.config_echo = cfg.to_json();
  for (ModelKind model : models) {
    for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t cell_seed = derive_stream(
          cfg.seed, kStreamCell + 16 * static_cast<std::uint64_t>(model), fi);
      try {
        FitResult fit = train_model(model, cfg, splits[fi].first, cell_seed);
        CellReport cell;
        cell.model = model;
        cell.fraction = cfg.fractions[fi];
        cell.train_accuracy = evaluate(fit.predict, splits[fi].first).accuracy;
        cell.test_eval = evaluate(fit.predict, splits[fi].second);
        cell.test_accuracy = cell.test_eval.accuracy;
        cell.epochs_run = fit.train.epochs_run;
        cell.epochs_to_95pct_train = fit.train.epochs_to_95pct_train;
        cell.seed = cfg.seed;
        cell.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        report.cells.push_back(std::move(cell));
      } catch (const std::exception& e) {
        throw std::runtime_error(std::string("cell (") + to_string(model) +
                                 ", " + cfg.fractions[fi].label +
                                 ") failed: " + e.what());
      }
    }
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "report.json",
                      std::ios::binary);
    out << report.to_json().dump(2) << '\n';
    if (cfg.export_images) {
      const auto img_dir = std::filesystem::path(cfg.out_dir) / "images";
      std::filesystem::create_directories(img_dir);
      for (const auto& ev : dataset.events) {
        export_pgm(encode_event(ev, cfg.window_s, cfg.image_size),
                   img_dir / (ev.event_id + ".pgm"));
      }
    }
  }
  return report;
}

}  // namespace gridgaf
