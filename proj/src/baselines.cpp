#include "gridgaf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "gridgaf/gaf.hpp"
#include "json.hpp"

namespace gridgaf {

const char* to_string(FeatureMode m) {
  return m == FeatureMode::RawSeries ? "raw_series" : "flattened_gaf";
}

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "raw_series") return FeatureMode::RawSeries;
  if (s == "flattened_gaf") return FeatureMode::FlattenedGaf;
  throw std::runtime_error("unknown feature mode: " + s);
}

std::vector<double> featurize(const TimeSeriesEvent& event, FeatureMode mode,
                              double window_s, std::size_t length) {
  if (mode == FeatureMode::RawSeries) {
    return paa_reduce(truncate_window(event, window_s).samples, length);
  }
  return encode_event(event, window_s, length).values;
}

double gini_impurity(std::span<const std::size_t> class_counts) {
  std::size_t total = 0;
  for (std::size_t c : class_counts) total += c;
  if (total == 0) {
    throw std::invalid_argument("gini_impurity: all counts zero");
  }
  double sum_sq = 0.0;
  for (std::size_t c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

// ---- CART ----

namespace {

struct SplitChoice {
  int feature;
  double threshold;
  double weighted_gini;
};

struct SplitSearch {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;
  int num_classes;
  std::size_t min_samples_leaf;

  // Best split over the given sample indices; nullopt when nothing strictly
  // reduces the weighted impurity while honoring min_samples_leaf.
  std::optional<SplitChoice> best(const std::vector<std::size_t>& idx) const {
    const std::size_t n = idx.size();
    const std::size_t d = x[idx[0]].size();
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i : idx) counts[static_cast<std::size_t>(y[i])]++;
    const double parent =
        gini_impurity(std::span<const std::size_t>(counts)) *
        static_cast<double>(n);

    std::optional<SplitChoice> best;
    std::vector<std::pair<double, int>> order(n);
    std::vector<std::size_t> left_counts(static_cast<std::size_t>(num_classes));
    for (std::size_t f = 0; f < d; ++f) {
      for (std::size_t k = 0; k < n; ++k) {
        order[k] = {x[idx[k]][f], y[idx[k]]};
      }
      std::sort(order.begin(), order.end());
      std::fill(left_counts.begin(), left_counts.end(), 0);
      auto right_counts = counts;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto cls = static_cast<std::size_t>(order[k].second);
        left_counts[cls]++;
        right_counts[cls]--;
        if (order[k].first == order[k + 1].first) continue;  // not distinct
        const std::size_t n_left = k + 1, n_right = n - n_left;
        if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
        const double threshold =
            order[k].first + (order[k + 1].first - order[k].first) / 2.0;
        const double weighted =
            gini_impurity(std::span<const std::size_t>(left_counts)) *
                static_cast<double>(n_left) +
            gini_impurity(std::span<const std::size_t>(right_counts)) *
                static_cast<double>(n_right);
        if (weighted >= parent - 1e-12) continue;  // must strictly decrease
        if (!best || weighted < best->weighted_gini - 1e-12) {
          best = SplitChoice{static_cast<int>(f), threshold, weighted};
        }
        // equal weighted gini: keep lowest feature, then lowest threshold,
        // which is the scan order, so no update needed
      }
    }
    return best;
  }
};

int majority_class(const std::vector<std::size_t>& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

DecisionTree DecisionTree::fit(const std::vector<std::vector<double>>& features,
                               const std::vector<int>& labels,
                               const DtConfig& cfg, int num_classes) {
  if (features.empty() || features.size() != labels.size()) {
    throw std::invalid_argument("DecisionTree::fit: empty or mismatched data");
  }
  const std::size_t d = features[0].size();
  for (const auto& row : features) {
    if (row.size() != d) {
      throw std::invalid_argument("DecisionTree::fit: inconsistent feature dims");
    }
  }
  if (cfg.min_samples_split < 2 || cfg.min_samples_leaf < 1) {
    throw std::invalid_argument("DecisionTree::fit: bad config");
  }

  DecisionTree tree;
  tree.feature_dim_ = d;
  tree.num_classes_ = num_classes;
  const SplitSearch search{features, labels, num_classes, cfg.min_samples_leaf};

  // recursive build; preorder node layout
  struct Builder {
    const SplitSearch& search;
    const DtConfig& cfg;
    const std::vector<std::vector<double>>& x;
    const std::vector<int>& y;
    int num_classes;
    std::vector<DtNode>& nodes;

    std::uint32_t build(const std::vector<std::size_t>& idx, int depth) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
      for (std::size_t i : idx) counts[static_cast<std::size_t>(y[i])]++;

      const std::uint32_t me = static_cast<std::uint32_t>(nodes.size());
      nodes.emplace_back();

      const bool pure =
          *std::max_element(counts.begin(), counts.end()) == idx.size();
      const bool too_small = idx.size() < cfg.min_samples_split;
      const bool at_depth = cfg.max_depth >= 0 && depth >= cfg.max_depth;
      std::optional<SplitChoice> split;
      if (!pure && !too_small && !at_depth) split = search.best(idx);

      if (!split) {
        nodes[me].leaf_class = majority_class(counts);
        return me;
      }

      std::vector<std::size_t> left_idx, right_idx;
      for (std::size_t i : idx) {
        (x[i][static_cast<std::size_t>(split->feature)] <= split->threshold
             ? left_idx
             : right_idx)
            .push_back(i);
      }
      nodes[me].feature = split->feature;
      nodes[me].threshold = split->threshold;
      const std::uint32_t l = build(left_idx, depth + 1);
      const std::uint32_t r = build(right_idx, depth + 1);
      nodes[me].left = l;
      nodes[me].right = r;
      return me;
    }
  };

  std::vector<std::size_t> idx(features.size());
  std::iota(idx.begin(), idx.end(), 0);
  Builder{search, cfg, features, labels, num_classes, tree.nodes_}.build(idx, 0);
  return tree;
}

int DecisionTree::predict(std::span<const double> x) const {
  if (x.size() != feature_dim_) {
    throw std::invalid_argument("DecisionTree::predict: dimension mismatch");
  }
  std::uint32_t node = 0;
  while (nodes_[node].leaf_class < 0) {
    const DtNode& nd = nodes_[node];
    node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                   : nd.right;
  }
  return nodes_[node].leaf_class;
}

nn::Checkpoint DecisionTree::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.kind = nn::kCkptKindDt;
  nlohmann::json meta{{"model", "dt"},
                      {"feature_dim", feature_dim_},
                      {"num_classes", num_classes_},
                      {"num_nodes", nodes_.size()}};
  ckpt.meta_json = meta.dump();
  // preorder node list: feature, threshold, left, right, leaf_class
  nn::CheckpointBlock b;
  b.name = "tree_nodes";
  b.dtype = 1;
  b.bytes.resize(nodes_.size() * 24);
  std::uint8_t* p = b.bytes.data();
  auto put32 = [&p](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) *p++ = static_cast<std::uint8_t>(v >> (8 * i));
  };
  auto put64 = [&p](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) *p++ = static_cast<std::uint8_t>(v >> (8 * i));
  };
  for (const auto& nd : nodes_) {
    put32(static_cast<std::uint32_t>(nd.feature));
    std::uint64_t bits;
    std::memcpy(&bits, &nd.threshold, 8);
    put64(bits);
    put32(nd.left);
    put32(nd.right);
    put32(static_cast<std::uint32_t>(nd.leaf_class));
  }
  ckpt.blocks.push_back(std::move(b));
  return ckpt;
}

DecisionTree DecisionTree::from_checkpoint(const nn::Checkpoint& ckpt) {
  const nlohmann::json meta = nlohmann::json::parse(ckpt.meta_json);
  DecisionTree tree;
  tree.feature_dim_ = meta.at("feature_dim").get<std::size_t>();
  tree.num_classes_ = meta.at("num_classes").get<int>();
  const auto& b = ckpt.find("tree_nodes");
  if (b.bytes.size() % 24 != 0) {
    throw std::runtime_error("decision tree checkpoint: bad node payload");
  }
  const std::uint8_t* p = b.bytes.data();
  auto get32 = [&p]() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(*p++) << (8 * i);
    return v;
  };
  auto get64 = [&p]() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(*p++) << (8 * i);
    return v;
  };
  tree.nodes_.resize(b.bytes.size() / 24);
  for (auto& nd : tree.nodes_) {
    nd.feature = static_cast<int>(get32());
    const std::uint64_t bits = get64();
    std::memcpy(&nd.threshold, &bits, 8);
    nd.left = get32();
    nd.right = get32();
    nd.leaf_class = static_cast<int>(get32());
  }
  return tree;
}

// ---- SVM ----

double rbf_kernel(std::span<const double> x, std::span<const double> y,
                  double gamma) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("rbf_kernel: dimension mismatch");
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

BinarySvm svm_fit_binary(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, const SvmConfig& cfg) {
  const std::size_t n = features.size();
  if (n == 0 || labels.size() != n) {
    throw std::invalid_argument("svm_fit_binary: empty or mismatched data");
  }
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw std::invalid_argument("svm_fit_binary: labels must be +/-1");
  }
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("svm_fit_binary: both classes must be present");
  }
  if (!(cfg.c > 0.0) || cfg.gamma < 0.0) {
    throw std::invalid_argument("svm_fit_binary: C must be positive, gamma nonnegative");
  }

  // dense kernel matrix; training sets here are a few hundred samples
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double k = rbf_kernel(features[i], features[j], cfg.gamma);
      K[i * n + j] = k;
      K[j * n + i] = k;
    }
  }
  const auto y = [&](std::size_t i) { return static_cast<double>(labels[i]); };

  // G_i = d(0.5 a'Qa - e'a)/da_i with Q_ij = y_i y_j K_ij; starts at -1
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  const double C = cfg.c;
  std::size_t iterations = 0;

  while (iterations < cfg.max_passes) {
    // maximal violating pair
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_up = -1, i_low = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y(t) * G[t];
      const bool in_up = (labels[t] == 1 && alpha[t] < C) ||
                         (labels[t] == -1 && alpha[t] > 0.0);
      const bool in_low = (labels[t] == -1 && alpha[t] < C) ||
                          (labels[t] == 1 && alpha[t] > 0.0);
      if (in_up && v > m_up) {
        m_up = v;
        i_up = static_cast<std::ptrdiff_t>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        i_low = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i_up < 0 || i_low < 0 || m_up - m_low <= cfg.tolerance) break;

    const std::size_t i = static_cast<std::size_t>(i_up);
    const std::size_t j = static_cast<std::size_t>(i_low);
    const double yi = y(i), yj = y(j);

    // step d moves a_i by +yi*d and a_j by -yj*d, preserving y'a = 0
    double quad = K[i * n + i] + K[j * n + j] - 2.0 * K[i * n + j];
    if (quad <= 0.0) quad = 1e-12;
    double d = (m_up - m_low) / quad;

    // feasible interval for d under the box constraints
    const double hi_i = yi > 0.0 ? C - alpha[i] : alpha[i];
    const double hi_j = yj > 0.0 ? alpha[j] : C - alpha[j];
    d = std::min(d, std::min(hi_i, hi_j));
    if (!(d > 0.0)) break;

    const double dai = yi * d;
    const double daj = -yj * d;
    alpha[i] += dai;
    alpha[j] += daj;
    for (std::size_t t = 0; t < n; ++t) {
      G[t] += y(t) * (yi * K[i * n + t] * dai + yj * K[j * n + t] * daj);
    }
    ++iterations;
  }

  BinarySvm svm;
  svm.alpha = alpha;
  svm.gamma = cfg.gamma;
  svm.iterations = iterations;

  // bias from free support vectors; fall back to the bound midpoint
  double b_sum = 0.0;
  std::size_t b_count = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    // f(x_t) without bias = sum_j a_j y_j K_tj = y_t * (G_t + 1)
    const double ft = y(t) * (G[t] + 1.0);
    const double r = y(t) - ft;
    const bool free_sv = alpha[t] > 1e-12 && alpha[t] < C - 1e-12;
    if (free_sv) {
      b_sum += r;
      b_count++;
    } else if ((labels[t] == 1 && alpha[t] <= 1e-12) ||
               (labels[t] == -1 && alpha[t] >= C - 1e-12)) {
      lb = std::max(lb, r);  // KKT wants y_t*f(x_t) at or above the margin
    } else {
      ub = std::min(ub, r);
    }
  }
  if (b_count > 0) {
    svm.bias = b_sum / static_cast<double>(b_count);
  } else if (std::isfinite(lb) && std::isfinite(ub)) {
    svm.bias = (lb + ub) / 2.0;
  } else if (std::isfinite(lb)) {
    svm.bias = lb;
  } else if (std::isfinite(ub)) {
    svm.bias = ub;
  }

  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 1e-12) {
      svm.support.push_back(t);
      svm.support_vectors.push_back(features[t]);
      svm.support_coef.push_back(alpha[t] * y(t));
    }
  }

  // dual objective: sum a - 0.5 sum_ij a_i a_j y_i y_j K_ij (support only)
  double obj = 0.0;
  for (std::size_t a = 0; a < svm.support.size(); ++a) {
    const std::size_t i = svm.support[a];
    obj += alpha[i];
    for (std::size_t b2 = 0; b2 < svm.support.size(); ++b2) {
      const std::size_t j = svm.support[b2];
      obj -= 0.5 * alpha[i] * alpha[j] * y(i) * y(j) * K[i * n + j];
    }
  }
  svm.dual_objective = obj;
  return svm;
}

double svm_decision(const BinarySvm& svm, std::span<const double> x) {
  double f = svm.bias;
  for (std::size_t k = 0; k < svm.support_vectors.size(); ++k) {
    f += svm.support_coef[k] * rbf_kernel(svm.support_vectors[k], x, svm.gamma);
  }
  return f;
}

// ---- one-vs-one multiclass ----

SvmMulticlass SvmMulticlass::fit(const std::vector<std::vector<double>>& features,
                                 const std::vector<int>& labels,
                                 const SvmConfig& cfg, int num_classes) {
  if (features.empty() || features.size() != labels.size()) {
    throw std::invalid_argument("SvmMulticlass::fit: empty or mismatched data");
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int yv : labels) {
    if (yv < 0 || yv >= num_classes) {
      throw std::invalid_argument("SvmMulticlass::fit: label out of range");
    }
    counts[static_cast<std::size_t>(yv)]++;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw std::invalid_argument("SvmMulticlass::fit: class " +
                                  std::to_string(c) + " missing");
    }
  }

  SvmMulticlass model;
  model.num_classes_ = num_classes;
  const std::size_t d = features[0].size();
  const std::size_t n = features.size();

  // standardization statistics from the training data only
  model.mean_.assign(d, 0.0);
  model.inv_std_.assign(d, 1.0);
  for (const auto& row : features) {
    for (std::size_t f = 0; f < d; ++f) model.mean_[f] += row[f];
  }
  for (double& m : model.mean_) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& row : features) {
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = row[f] - model.mean_[f];
      var[f] += dv * dv;
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    const double sd = std::sqrt(var[f] / static_cast<double>(n));
    model.inv_std_[f] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }

  std::vector<std::vector<double>> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = model.scale_x(features[i]);

  for (int a = 0; a < num_classes; ++a) {
    for (int b = a + 1; b < num_classes; ++b) {
      std::vector<std::vector<double>> sub_x;
      std::vector<int> sub_y;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == a) {
          sub_x.push_back(scaled[i]);
          sub_y.push_back(-1);
        } else if (labels[i] == b) {
          sub_x.push_back(scaled[i]);
          sub_y.push_back(+1);
        }
      }
      model.machines_.push_back(svm_fit_binary(sub_x, sub_y, cfg));
      model.pairs_.emplace_back(a, b);
    }
  }
  return model;
}

std::vector<double> SvmMulticlass::scale_x(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw std::invalid_argument("SvmMulticlass: dimension mismatch");
  }
  std::vector<double> out(x.size());
  for (std::size_t f = 0; f < x.size(); ++f) {
    out[f] = (x[f] - mean_[f]) * inv_std_[f];
  }
  return out;
}

int SvmMulticlass::predict(std::span<const double> x) const {
  const std::vector<double> xs = scale_x(x);
  std::vector<int> votes(static_cast<std::size_t>(num_classes_), 0);
  std::vector<double> strength(static_cast<std::size_t>(num_classes_), 0.0);
  for (std::size_t k = 0; k < machines_.size(); ++k) {
    const double f = svm_decision(machines_[k], xs);
    const int winner = f >= 0.0 ? pairs_[k].second : pairs_[k].first;
    votes[static_cast<std::size_t>(winner)]++;
    strength[static_cast<std::size_t>(winner)] =
        std::max(strength[static_cast<std::size_t>(winner)], std::abs(f));
  }
  int best = 0;
  for (int c = 1; c < num_classes_; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    const auto cb = static_cast<std::size_t>(best);
    if (votes[cc] > votes[cb] ||
        (votes[cc] == votes[cb] && strength[cc] > strength[cb])) {
      best = c;
    }
  }
  return best;
}

nn::Checkpoint SvmMulticlass::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.kind = nn::kCkptKindSvm;
  nlohmann::json meta{{"model", "svm"},
                      {"feature_dim", mean_.size()},
                      {"num_classes", num_classes_},
                      {"num_machines", machines_.size()}};
  nlohmann::json jpairs = nlohmann::json::array();
  for (const auto& [a, b] : pairs_) jpairs.push_back({a, b});
  meta["pairs"] = jpairs;
  ckpt.meta_json = meta.dump();

  auto tensor_block = [](std::string name, std::vector<std::size_t> dims,
                         std::vector<double> data) {
    nn::CheckpointBlock b;
    b.name = std::move(name);
    b.dtype = 0;
    b.dims = std::move(dims);
    b.f64 = std::move(data);
    return b;
  };
  ckpt.blocks.push_back(tensor_block("mean", {mean_.size()}, mean_));
  ckpt.blocks.push_back(tensor_block("inv_std", {inv_std_.size()}, inv_std_));
  for (std::size_t k = 0; k < machines_.size(); ++k) {
    const auto& m = machines_[k];
    const std::string prefix = "svm" + std::to_string(k) + "_";
    const std::size_t nsv = m.support_vectors.size();
    const std::size_t d = mean_.size();
    std::vector<double> sv_flat;
    sv_flat.reserve(nsv * d);
    for (const auto& v : m.support_vectors) {
      sv_flat.insert(sv_flat.end(), v.begin(), v.end());
    }
    ckpt.blocks.push_back(tensor_block(prefix + "sv", {nsv, d}, sv_flat));
    ckpt.blocks.push_back(tensor_block(prefix + "coef", {nsv}, m.support_coef));
    ckpt.blocks.push_back(
        tensor_block(prefix + "bias_gamma", {2}, {m.bias, m.gamma}));
  }
  return ckpt;
}

SvmMulticlass SvmMulticlass::from_checkpoint(const nn::Checkpoint& ckpt) {
  const nlohmann::json meta = nlohmann::json::parse(ckpt.meta_json);
  SvmMulticlass model;
  model.num_classes_ = meta.at("num_classes").get<int>();
  model.mean_ = ckpt.find("mean").f64;
  model.inv_std_ = ckpt.find("inv_std").f64;
  const std::size_t n_machines = meta.at("num_machines").get<std::size_t>();
  for (const auto& p : meta.at("pairs")) {
    model.pairs_.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }
  const std::size_t d = model.mean_.size();
  for (std::size_t k = 0; k < n_machines; ++k) {
    const std::string prefix = "svm" + std::to_string(k) + "_";
    BinarySvm m;
    const auto& sv = ckpt.find(prefix + "sv");
    const std::size_t nsv = sv.dims.at(0);
    for (std::size_t i = 0; i < nsv; ++i) {
      m.support_vectors.emplace_back(sv.f64.begin() + static_cast<std::ptrdiff_t>(i * d),
                                     sv.f64.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
    m.support_coef = ckpt.find(prefix + "coef").f64;
    const auto& bg = ckpt.find(prefix + "bias_gamma").f64;
    m.bias = bg.at(0);
    m.gamma = bg.at(1);
    model.machines_.push_back(std::move(m));
  }
  return model;
}

}  // namespace gridgaf
