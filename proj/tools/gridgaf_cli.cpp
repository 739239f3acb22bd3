// gridgaf command line: synthetic data generation, GAF encoding/export,
// single-model training, evaluation, and the full experiment protocol.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gridgaf/experiment.hpp"
#include "gridgaf/gaf.hpp"
#include "gridgaf/kernels.hpp"
#include "json.hpp"

namespace {

using namespace gridgaf;

struct CommonOpts {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

struct HyperOverrides {
  std::optional<std::size_t> cnn_batch, cnn_epochs;
  std::optional<double> cnn_lr, cnn_momentum;
  std::optional<std::string> cnn_activation;
  std::optional<std::size_t> rnn_hidden, rnn_epochs, rnn_batch;
  std::optional<double> rnn_lr;
  std::optional<std::size_t> lstm_hidden, lstm_epochs, lstm_batch;
  std::optional<double> lstm_lr;
  std::optional<double> svm_c, svm_gamma, svm_tolerance;
  std::optional<std::size_t> dt_min_split, dt_min_leaf;
  std::optional<int> dt_max_depth;
  std::optional<std::string> baseline_features;
  std::optional<double> window_s;
  std::optional<std::size_t> image_size;
};

void add_hyper_flags(CLI::App* cmd, HyperOverrides& h) {
  cmd->add_option("--cnn-batch", h.cnn_batch, "CNN batch size");
  cmd->add_option("--cnn-epochs", h.cnn_epochs, "CNN training epochs");
  cmd->add_option("--cnn-lr", h.cnn_lr, "CNN learning rate");
  cmd->add_option("--cnn-momentum", h.cnn_momentum, "CNN SGD momentum");
  cmd->add_option("--cnn-activation", h.cnn_activation, "relu or tanh");
  cmd->add_option("--rnn-hidden", h.rnn_hidden, "RNN hidden units");
  cmd->add_option("--rnn-epochs", h.rnn_epochs, "RNN training epochs");
  cmd->add_option("--rnn-batch", h.rnn_batch, "RNN batch size");
  cmd->add_option("--rnn-lr", h.rnn_lr, "RNN learning rate");
  cmd->add_option("--lstm-hidden", h.lstm_hidden, "LSTM hidden units");
  cmd->add_option("--lstm-epochs", h.lstm_epochs, "LSTM training epochs");
  cmd->add_option("--lstm-batch", h.lstm_batch, "LSTM batch size");
  cmd->add_option("--lstm-lr", h.lstm_lr, "LSTM learning rate");
  cmd->add_option("--svm-c", h.svm_c, "SVM box constraint C");
  cmd->add_option("--svm-gamma", h.svm_gamma, "RBF gamma");
  cmd->add_option("--svm-tolerance", h.svm_tolerance, "SMO KKT tolerance");
  cmd->add_option("--dt-min-split", h.dt_min_split, "DT min samples to split");
  cmd->add_option("--dt-min-leaf", h.dt_min_leaf, "DT min samples per leaf");
  cmd->add_option("--dt-max-depth", h.dt_max_depth, "DT max depth (-1 unlimited)");
  cmd->add_option("--baseline-features", h.baseline_features,
                  "raw_series or flattened_gaf");
  cmd->add_option("--window-s", h.window_s, "analysis window, seconds");
  cmd->add_option("--image-size", h.image_size, "GAF image size");
}

ExperimentConfig build_config(const CommonOpts& common, const HyperOverrides& h) {
  ExperimentConfig cfg;
  if (common.config_path) {
    std::ifstream in(*common.config_path);
    if (!in) {
      throw std::runtime_error("cannot open config " + *common.config_path);
    }
    nlohmann::json j;
    in >> j;
    cfg = ExperimentConfig::from_json(j);
  }
  if (common.seed) cfg.seed = *common.seed;
  if (common.out) cfg.out_dir = *common.out;
  if (h.cnn_batch) cfg.cnn.batch_size = *h.cnn_batch;
  if (h.cnn_epochs) cfg.cnn.epochs = *h.cnn_epochs;
  if (h.cnn_lr) cfg.cnn.learning_rate = *h.cnn_lr;
  if (h.cnn_momentum) cfg.cnn.momentum = *h.cnn_momentum;
  if (h.cnn_activation) cfg.cnn.activation = activation_from_string(*h.cnn_activation);
  if (h.rnn_hidden) cfg.rnn.hidden_units = *h.rnn_hidden;
  if (h.rnn_epochs) cfg.rnn.epochs = *h.rnn_epochs;
  if (h.rnn_batch) cfg.rnn.batch_size = *h.rnn_batch;
  if (h.rnn_lr) cfg.rnn.learning_rate = *h.rnn_lr;
  if (h.lstm_hidden) cfg.lstm.hidden_units = *h.lstm_hidden;
  if (h.lstm_epochs) cfg.lstm.epochs = *h.lstm_epochs;
  if (h.lstm_batch) cfg.lstm.batch_size = *h.lstm_batch;
  if (h.lstm_lr) cfg.lstm.learning_rate = *h.lstm_lr;
  if (h.svm_c) cfg.svm.c = *h.svm_c;
  if (h.svm_gamma) cfg.svm.gamma = *h.svm_gamma;
  if (h.svm_tolerance) cfg.svm.tolerance = *h.svm_tolerance;
  if (h.dt_min_split) cfg.dt.min_samples_split = *h.dt_min_split;
  if (h.dt_min_leaf) cfg.dt.min_samples_leaf = *h.dt_min_leaf;
  if (h.dt_max_depth) cfg.dt.max_depth = *h.dt_max_depth;
  if (h.baseline_features) {
    cfg.baseline_features = feature_mode_from_string(*h.baseline_features);
  }
  if (h.window_s) cfg.window_s = *h.window_s;
  if (h.image_size) cfg.image_size = *h.image_size;
  return cfg;
}

int cmd_generate(const ExperimentConfig& cfg) {
  GeneratorConfig g = cfg.synth.generator;
  g.seed = cfg.seed;
  const Dataset data = build_dataset(g, cfg.synth.counts);
  save_dataset(data, cfg.out_dir);
  std::printf("wrote %zu events (%zu/%zu/%zu) to %s\n", data.size(),
              data.class_counts[0], data.class_counts[1], data.class_counts[2],
              cfg.out_dir.c_str());
  return 0;
}

int cmd_encode(const ExperimentConfig& cfg, const std::string& manifest) {
  const Dataset data = load_events(manifest);
  std::filesystem::create_directories(cfg.out_dir);
  nlohmann::json out_manifest = nlohmann::json::array();
  for (const auto& ev : data.events) {
    const GafImage img = encode_event(ev, cfg.window_s, cfg.image_size);
    const std::string name = ev.event_id + ".gaf";
    write_gaf_binary(img, std::filesystem::path(cfg.out_dir) / name);
    out_manifest.push_back({{"path", name},
                            {"label", to_string(ev.label)},
                            {"event_id", ev.event_id}});
  }
  std::ofstream mout(std::filesystem::path(cfg.out_dir) / "gaf_manifest.json",
                     std::ios::binary);
  mout << out_manifest.dump(2) << '\n';
  std::printf("encoded %zu events to %s (image size %zu)\n", data.size(),
              cfg.out_dir.c_str(), cfg.image_size);
  return 0;
}

int cmd_export_images(const ExperimentConfig& cfg, const std::string& manifest) {
  const Dataset data = load_events(manifest);
  std::filesystem::create_directories(cfg.out_dir);
  for (const auto& ev : data.events) {
    export_pgm(encode_event(ev, cfg.window_s, cfg.image_size),
               std::filesystem::path(cfg.out_dir) / (ev.event_id + ".pgm"));
  }
  std::printf("exported %zu PGM images to %s\n", data.size(), cfg.out_dir.c_str());
  return 0;
}

int cmd_train(ExperimentConfig cfg, const std::string& manifest,
              const std::string& model_name, const std::string& ckpt_path) {
  if (!manifest.empty()) cfg.manifest = manifest;
  const ModelKind kind = model_kind_from_string(model_name);
  const Dataset data = resolve_dataset(cfg);
  const PreparedData prepared =
      prepare_data(data, cfg.window_s, cfg.image_size, cfg.baseline_features);
  DataView all{&prepared, {}};
  for (std::size_t i = 0; i < prepared.size(); ++i) all.indices.push_back(i);
  const FitResult fit =
      train_model(kind, cfg, all, derive_stream(cfg.seed, 0xC3));
  for (std::size_t e = 0; e < fit.train.trace.size(); ++e) {
    std::printf("epoch %3zu  loss %.6f  train_acc %.4f\n", e + 1,
                fit.train.trace[e].mean_loss, fit.train.trace[e].train_accuracy);
  }
  nn::save_checkpoint(fit.checkpoint, ckpt_path);
  const double train_acc = evaluate(fit.predict, all).accuracy;
  std::printf("final train accuracy %.4f; checkpoint written to %s\n",
              train_acc, ckpt_path.c_str());
  return 0;
}

int cmd_evaluate(ExperimentConfig cfg, const std::string& manifest,
                 const std::string& ckpt_path) {
  if (!manifest.empty()) cfg.manifest = manifest;
  const nn::Checkpoint ckpt = nn::load_checkpoint(ckpt_path);

  // encoding settings come from the checkpoint when present
  const nlohmann::json meta = nlohmann::json::parse(ckpt.meta_json);
  if (meta.contains("input_size")) {
    cfg.image_size = meta.at("input_size").get<std::size_t>();
  }
  if (meta.contains("feature_length")) {
    cfg.image_size = meta.at("feature_length").get<std::size_t>();
  }
  if (meta.contains("window_s")) {
    cfg.window_s = meta.at("window_s").get<double>();
  }
  if (meta.contains("feature_mode")) {
    cfg.baseline_features =
        feature_mode_from_string(meta.at("feature_mode").get<std::string>());
  }

  const Dataset data = resolve_dataset(cfg);
  const PreparedData prepared =
      prepare_data(data, cfg.window_s, cfg.image_size, cfg.baseline_features);
  DataView all{&prepared, {}};
  for (std::size_t i = 0; i < prepared.size(); ++i) all.indices.push_back(i);

  Predictor predict;
  if (ckpt.kind == nn::kCkptKindDt) {
    auto tree = std::make_shared<DecisionTree>(DecisionTree::from_checkpoint(ckpt));
    predict = [tree](const PreparedData& d, std::size_t i) {
      return tree->predict(d.features[i]);
    };
  } else if (ckpt.kind == nn::kCkptKindSvm) {
    auto svm = std::make_shared<SvmMulticlass>(SvmMulticlass::from_checkpoint(ckpt));
    predict = [svm](const PreparedData& d, std::size_t i) {
      return svm->predict(d.features[i]);
    };
  } else {
    std::shared_ptr<NeuralNet> net = neural_net_from_checkpoint(ckpt);
    predict = [net](const PreparedData& d, std::size_t i) {
      return predict_class(net->forward(d.images[i]));
    };
  }

  const EvalResult r = evaluate(predict, all);
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  nlohmann::json conf = nlohmann::json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion_matrix"] = conf;
  j["num_events"] = all.size();
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_run_experiment(const ExperimentConfig& cfg) {
  const ExperimentReport report = run_experiment(cfg);
  std::printf("%-6s %-5s %-10s %-10s %s\n", "model", "split", "train_acc",
              "test_acc", "epochs_to_95pct");
  for (const auto& c : report.cells) {
    std::printf("%-6s %-5s %-10.4f %-10.4f %s\n", to_string(c.model),
                c.fraction.label.c_str(), c.train_accuracy, c.test_accuracy,
                c.epochs_to_95pct_train
                    ? std::to_string(*c.epochs_to_95pct_train).c_str()
                    : "-");
  }
  std::printf("report written to %s/report.json\n", cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-grid disturbance classification from synchrophasor "
               "angle series via Gramian Angular Field images"};
  app.require_subcommand(1);

  CommonOpts common;
  HyperOverrides hyper;
  app.add_option("--config", common.config_path, "experiment config JSON")
      ->envname("GRIDGAF_CONFIG");
  app.add_option("--seed", common.seed, "base PRNG seed");
  app.add_option("--out", common.out, "output directory");

  std::string manifest, model_name = "cnn", ckpt_path = "model.ckpt";
  std::array<std::size_t, 3> counts{142, 145, 87};

  auto* gen = app.add_subcommand("generate", "write synthetic event CSVs + manifest");
  gen->add_option("--counts", counts, "events per class (trip, shed, osc)");

  auto* enc = app.add_subcommand("encode", "encode events to raw GAF matrices");
  enc->add_option("--manifest", manifest, "event manifest")->required();

  auto* exp_img = app.add_subcommand("export-images", "export GAF images as PGM");
  exp_img->add_option("--manifest", manifest, "event manifest")->required();

  auto* train = app.add_subcommand("train", "train one model on a dataset");
  train->add_option("--manifest", manifest, "event manifest (default: synthetic)");
  train->add_option("--model", model_name, "cnn|rnn|lstm|dt|svm")->required();
  train->add_option("--checkpoint", ckpt_path, "checkpoint output path");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  eval->add_option("--manifest", manifest, "event manifest (default: synthetic)");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();

  auto* run = app.add_subcommand("run-experiment", "full split/train/evaluate protocol");

  for (CLI::App* cmd : {gen, enc, exp_img, train, eval, run}) {
    cmd->fallthrough();  // let --config/--seed/--out follow the subcommand
    add_hyper_flags(cmd, hyper);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = build_config(common, hyper);
    if (gen->parsed()) {
      cfg.synth.counts = counts;
      return cmd_generate(cfg);
    }
    if (enc->parsed()) return cmd_encode(cfg, manifest);
    if (exp_img->parsed()) return cmd_export_images(cfg, manifest);
    if (train->parsed()) return cmd_train(cfg, manifest, model_name, ckpt_path);
    if (eval->parsed()) return cmd_evaluate(cfg, manifest, ckpt_path);
    if (run->parsed()) return cmd_run_experiment(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
