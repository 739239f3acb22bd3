#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridgaf/data_model.hpp"
#include "gridgaf/nn.hpp"

namespace gridgaf {

enum class FeatureMode { RawSeries, FlattenedGaf };
const char* to_string(FeatureMode m);
FeatureMode feature_mode_from_string(const std::string& s);

// RawSeries: PAA of the truncated window, `length` values.
// FlattenedGaf: row-major flatten of the length x length GAF image.
std::vector<double> featurize(const TimeSeriesEvent& event, FeatureMode mode,
                              double window_s = 30.0, std::size_t length = 64);

// 1 - sum p_i^2
double gini_impurity(std::span<const std::size_t> class_counts);

// ---- CART decision tree ----

struct DtConfig {
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  int max_depth = -1;  // < 0: unlimited
};

struct DtNode {
  int feature = -1;          // -1 for leaves
  double threshold = 0.0;    // x[feature] <= threshold goes left
  std::uint32_t left = 0;    // node indices; 0 for leaves
  std::uint32_t right = 0;
  int leaf_class = -1;       // -1 for internal nodes
};

class DecisionTree {
 public:
  // Greedy CART with Gini impurity. Candidate thresholds are midpoints of
  // consecutive distinct sorted feature values; a node becomes a leaf when it
  // is pure, too small, at max depth, or no split strictly reduces impurity.
  // Ties: lowest feature index, then lowest threshold. Leaves predict the
  // majority class, ties toward the lowest class index.
  static DecisionTree fit(const std::vector<std::vector<double>>& features,
                          const std::vector<int>& labels, const DtConfig& cfg,
                          int num_classes = kNumClasses);

  int predict(std::span<const double> x) const;
  const std::vector<DtNode>& nodes() const { return nodes_; }  // preorder
  std::size_t feature_dim() const { return feature_dim_; }

  nn::Checkpoint to_checkpoint() const;
  static DecisionTree from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  std::vector<DtNode> nodes_;
  std::size_t feature_dim_ = 0;
  int num_classes_ = kNumClasses;
};

// ---- RBF-kernel SVM (SMO) ----

double rbf_kernel(std::span<const double> x, std::span<const double> y,
                  double gamma);

struct SvmConfig {
  double c = 1.0;
  double gamma = 0.033;
  double tolerance = 1e-3;
  std::size_t max_passes = 1'000'000;  // cap on SMO pair updates
};

struct BinarySvm {
  std::vector<double> alpha;            // one per training sample
  double bias = 0.0;
  std::vector<std::size_t> support;     // indices with alpha > 0
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> support_coef;     // alpha_i * y_i for support vectors
  double gamma = 0.0;
  double dual_objective = 0.0;
  std::size_t iterations = 0;
};

// Soft-margin dual via sequential minimal optimization with maximal-violating
// -pair selection; stops when the KKT violation gap is within cfg.tolerance.
// labels must be +/-1 with both classes present.
BinarySvm svm_fit_binary(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, const SvmConfig& cfg);

double svm_decision(const BinarySvm& svm, std::span<const double> x);

// One-vs-one multiclass with per-feature standardization (training statistics
// only). Vote ties break by largest absolute decision value, then lowest
// class index.
class SvmMulticlass {
 public:
  static SvmMulticlass fit(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels,
                           const SvmConfig& cfg, int num_classes = kNumClasses);
  int predict(std::span<const double> x) const;

  nn::Checkpoint to_checkpoint() const;
  static SvmMulticlass from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  std::vector<double> scale_x(std::span<const double> x) const;

  std::vector<double> mean_, inv_std_;
  // machines in (a,b) order: (0,1), (0,2), (1,2); positive label is b
  std::vector<BinarySvm> machines_;
  std::vector<std::pair<int, int>> pairs_;
  int num_classes_ = kNumClasses;
};

}  // namespace gridgaf
