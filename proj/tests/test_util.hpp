#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "gridgaf/models.hpp"
#include "gridgaf/nn.hpp"
#include "gridgaf/rng.hpp"
#include "gridgaf/tensor.hpp"

namespace testutil {

// Independent CART split oracle: enumerates every (feature, midpoint)
// candidate and recounts both children from scratch. Shares no code with the
// library's incremental split search; only the documented tie rule (lowest
// feature index, then lowest threshold, 1e-12 comparison slack) is mirrored.
struct NaiveSplit {
  int feature;
  double threshold;
  double weighted_gini;
};

inline std::optional<NaiveSplit> naive_best_split(
    const std::vector<std::vector<double>>& x, const std::vector<int>& y,
    int num_classes = 3, std::size_t min_samples_leaf = 1) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  auto gini_times_n = [&](const std::vector<std::size_t>& counts,
                          std::size_t total) {
    double sum_sq = 0.0;
    for (std::size_t c : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      sum_sq += p * p;
    }
    return (1.0 - sum_sq) * static_cast<double>(total);
  };
  std::vector<std::size_t> parent_counts(static_cast<std::size_t>(num_classes), 0);
  for (int label : y) parent_counts[static_cast<std::size_t>(label)]++;
  const double parent = gini_times_n(parent_counts, n);

  std::optional<NaiveSplit> best;
  for (std::size_t f = 0; f < d; ++f) {
    std::vector<double> values;
    for (const auto& row : x) values.push_back(row[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double threshold = values[k] + (values[k + 1] - values[k]) / 2.0;
      std::vector<std::size_t> left(static_cast<std::size_t>(num_classes), 0);
      std::vector<std::size_t> right(static_cast<std::size_t>(num_classes), 0);
      std::size_t nl = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i][f] <= threshold) {
          left[static_cast<std::size_t>(y[i])]++;
          nl++;
        } else {
          right[static_cast<std::size_t>(y[i])]++;
        }
      }
      const std::size_t nr = n - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      const double weighted = gini_times_n(left, nl) + gini_times_n(right, nr);
      if (weighted >= parent - 1e-12) continue;
      if (!best || weighted < best->weighted_gini - 1e-12) {
        best = NaiveSplit{static_cast<int>(f), threshold, weighted};
      }
    }
  }
  return best;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// central finite differences, h = 1e-5 by default
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(const std::vector<double>& a,
                          const std::vector<double>& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, rel_err(a[i], b[i], floor));
  }
  return worst;
}

inline gridgaf::Tensor random_tensor(std::vector<std::size_t> shape,
                                     gridgaf::Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
  gridgaf::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, gridgaf::Rng& rng,
                                         double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// mean cross-entropy loss over a small batch, as a function of the
// flattened parameter vector
inline double model_batch_loss(gridgaf::NeuralNet& net,
                               const std::vector<gridgaf::Tensor>& images,
                               const std::vector<int>& targets) {
  gridgaf::Tensor grad({3});
  double total = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    total += gridgaf::nn::softmax_xent_loss(net.forward(images[i]), targets[i], grad);
  }
  return total / static_cast<double>(images.size());
}

// analytic gradient of model_batch_loss w.r.t. all parameters, flattened
inline std::vector<double> model_batch_grad(
    gridgaf::NeuralNet& net, const std::vector<gridgaf::Tensor>& images,
    const std::vector<int>& targets) {
  gridgaf::nn::zero_grads(net.params());
  gridgaf::Tensor grad({3});
  const double inv = 1.0 / static_cast<double>(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    gridgaf::nn::softmax_xent_loss(net.forward(images[i]), targets[i], grad);
    for (std::size_t k = 0; k < grad.numel(); ++k) grad[k] *= inv;
    net.backward(grad);
  }
  return gridgaf::nn::flatten_grads(net.params());
}

// max relative error between analytic and finite-difference gradients of the
// model's batch loss
inline double model_gradient_check(gridgaf::NeuralNet& net,
                                   const std::vector<gridgaf::Tensor>& images,
                                   const std::vector<int>& targets,
                                   double h = 1e-5) {
  const std::vector<double> analytic = model_batch_grad(net, images, targets);
  const std::vector<double> base = gridgaf::nn::flatten_values(net.params());
  auto loss_at = [&](const std::vector<double>& flat) {
    gridgaf::nn::set_values(net.params(), flat);
    return model_batch_loss(net, images, targets);
  };
  const std::vector<double> fd = fd_gradient(loss_at, base, h);
  gridgaf::nn::set_values(net.params(), base);
  return max_rel_err(analytic, fd);
}

}  // namespace testutil
