#pragma once

// Representation-quality metrics on frozen features.

#include "glf/autodiff.hpp"
#include "glf/data.hpp"
#include "glf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace glf {

struct ProbeConfig {
  std::size_t epochs = 100;
  double momentum = 0.9;
  double weight_decay = 5e-6;
  double lr_initial = 1e-2;
  double lr_final = 1e-6;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr_initial >= lr_final && lr_final > 0.0)) throw std::invalid_argument("probe learning rates must satisfy lr_initial >= lr_final > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("probe momentum must be in [0, 1)");
    if (batch_size < 1) throw std::invalid_argument("probe batch_size must be >= 1");
  }
};

struct MetricsReport {
  double linear_acc = 0.0;           // [0, 1]
  double knn_acc = 0.0;              // [0, 1]
  double mean_ce = 0.0;              // nats
  double cond_variance = 0.0;        // squared embedding units
  double intra_compactness = 0.0;    // sqrt(cond_variance), embedding units
  double inter_separability = 0.0;   // min class-mean distance / within-class spread
  double alignment = 0.0;            // squared embedding units
  double uniformity = 0.0;           // nats
};

namespace detail {

inline void require_labels(const Mat& feats, const std::vector<int>& labels, const char* op) {
  if (labels.size() != static_cast<std::size_t>(feats.rows())) throw ShapeError(std::string(op) + ": label count mismatch");
  for (int l : labels)
    if (l < 0) throw std::invalid_argument(std::string(op) + ": negative label");
}

inline int count_classes(const std::vector<int>& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

// Class means; throws when a class in [0, K) has no members.
inline std::vector<Vec> class_means(const Mat& feats, const std::vector<int>& labels, int k, const char* op) {
  std::vector<Vec> mu(static_cast<std::size_t>(k), Vec::Zero(feats.cols()));
  std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mu[static_cast<std::size_t>(labels[i])] += feats.row(static_cast<Eigen::Index>(i)).transpose();
    ++count[static_cast<std::size_t>(labels[i])];
  }
  for (int c = 0; c < k; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) throw std::invalid_argument(std::string(op) + ": class " + std::to_string(c) + " is missing");
    mu[static_cast<std::size_t>(c)] /= static_cast<double>(count[static_cast<std::size_t>(c)]);
  }
  return mu;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear probe

struct LinearClassifier {
  Mat weight;  // d x K
  Mat bias;    // 1 x K
  std::vector<double> class_prior;

  // Argmax of logits; exact ties go to the class with the larger training
  // prior, then the lower index.
  std::vector<int> predict(const Mat& feats) const {
    const Mat logits = (feats * weight).rowwise() + bias.row(0);
    std::vector<int> out(static_cast<std::size_t>(feats.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      int best = 0;
      for (Eigen::Index c = 1; c < logits.cols(); ++c) {
        const double a = logits(i, c), b = logits(i, best);
        if (a > b || (a == b && class_prior[static_cast<std::size_t>(c)] > class_prior[static_cast<std::size_t>(best)]))
          best = static_cast<int>(c);
      }
      out[static_cast<std::size_t>(i)] = best;
    }
    return out;
  }
};

// Multinomial logistic regression from a zero initialization, trained with
// mini-batch SGD (momentum, weight decay, cosine lr decay).
inline LinearClassifier train_linear_probe(const Mat& feats, const std::vector<int>& labels, const ProbeConfig& cfg) {
  cfg.validate();
  detail::require_labels(feats, labels, "linear_probe");
  const int k = detail::count_classes(labels);
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw std::invalid_argument("linear_probe: training set has a single class");

  const Eigen::Index n = feats.rows(), d = feats.cols();
  LinearClassifier clf{Mat::Zero(d, k), Mat::Zero(1, k), {}};
  for (auto c : counts) clf.class_prior.push_back(static_cast<double>(c) / static_cast<double>(n));

  const std::size_t bs = std::min<std::size_t>(cfg.batch_size, static_cast<std::size_t>(n));
  const std::size_t steps_per_epoch = (static_cast<std::size_t>(n) + bs - 1) / bs;
  CosineSchedule sched{cfg.lr_initial, cfg.lr_final, cfg.epochs * steps_per_epoch};
  Mat vw = Mat::Zero(d, k), vb = Mat::Zero(1, k);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed({cfg.seed, 0x9b0beULL}));
  std::size_t step = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < static_cast<std::size_t>(n); s += bs) {
      const std::size_t len = std::min(bs, static_cast<std::size_t>(n) - s);
      Mat x(static_cast<Eigen::Index>(len), d);
      Mat y = Mat::Zero(static_cast<Eigen::Index>(len), k);
      for (std::size_t r = 0; r < len; ++r) {
        x.row(static_cast<Eigen::Index>(r)) = feats.row(static_cast<Eigen::Index>(order[s + r]));
        y(static_cast<Eigen::Index>(r), labels[order[s + r]]) = 1.0;
      }
      Mat logits = (x * clf.weight).rowwise() + clf.bias.row(0);
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - m).exp().matrix();
        logits.row(r) /= logits.row(r).sum();
      }
      const Mat g_logits = (logits - y) / static_cast<double>(len);
      const Mat gw = x.transpose() * g_logits + cfg.weight_decay * clf.weight;
      const Mat gb = g_logits.colwise().sum() + cfg.weight_decay * clf.bias;
      const double lr = sched.at(step++);
      vw = cfg.momentum * vw + gw;
      vb = cfg.momentum * vb + gb;
      clf.weight -= lr * vw;
      clf.bias -= lr * vb;
    }
  }
  return clf;
}

inline double linear_probe(const Mat& train_feats, const std::vector<int>& train_labels, const Mat& test_feats,
                           const std::vector<int>& test_labels, const ProbeConfig& cfg) {
  detail::require_labels(test_feats, test_labels, "linear_probe");
  const LinearClassifier clf = train_linear_probe(train_feats, train_labels, cfg);
  return detail::accuracy(clf.predict(test_feats), test_labels);
}

// ---------------------------------------------------------------------------
// k-NN

enum class KnnMetric { Euclidean, Cosine };

inline std::vector<int> knn_predict(const Mat& train_feats, const std::vector<int>& train_labels, const Mat& test_feats,
                                    std::size_t k = 5, KnnMetric metric = KnnMetric::Euclidean) {
  if (train_feats.rows() == 0) throw std::invalid_argument("knn_classify: empty training set");
  detail::require_labels(train_feats, train_labels, "knn_classify");
  if (k < 1 || k > static_cast<std::size_t>(train_feats.rows())) throw std::invalid_argument("knn_classify: k out of range");
  if (test_feats.cols() != train_feats.cols()) throw ShapeError("knn_classify: feature dimension mismatch");

  Mat tr = train_feats, te = test_feats;
  if (metric == KnnMetric::Cosine) {
    tr = tr.rowwise().normalized();
    te = te.rowwise().normalized();
  }
  const int n_cls = detail::count_classes(train_labels);
  std::vector<int> out(static_cast<std::size_t>(te.rows()));
  std::vector<std::pair<double, std::size_t>> d(static_cast<std::size_t>(tr.rows()));
  for (Eigen::Index i = 0; i < te.rows(); ++i) {
    for (Eigen::Index j = 0; j < tr.rows(); ++j) {
      d[static_cast<std::size_t>(j)] = {(tr.row(j) - te.row(i)).squaredNorm(), static_cast<std::size_t>(j)};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> votes(static_cast<std::size_t>(n_cls), 0);
    std::vector<double> dist(static_cast<std::size_t>(n_cls), 0.0);
    for (std::size_t q = 0; q < k; ++q) {
      const auto l = static_cast<std::size_t>(train_labels[d[q].second]);
      ++votes[l];
      dist[l] += std::sqrt(d[q].first);
    }
    int best = -1;
    for (int c = 0; c < n_cls; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      if (votes[cc] == 0) continue;
      if (best < 0) {
        best = c;
        continue;
      }
      const auto bb = static_cast<std::size_t>(best);
      if (votes[cc] > votes[bb] || (votes[cc] == votes[bb] && dist[cc] < dist[bb])) best = c;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// Majority vote of the k nearest training points; ties go to the smaller
// summed neighbour distance, then the lower label.
inline double knn_classify(const Mat& train_feats, const std::vector<int>& train_labels, const Mat& test_feats,
                           const std::vector<int>& test_labels, std::size_t k = 5,
                           KnnMetric metric = KnnMetric::Euclidean) {
  detail::require_labels(test_feats, test_labels, "knn_classify");
  return detail::accuracy(knn_predict(train_feats, train_labels, test_feats, k, metric), test_labels);
}

// ---------------------------------------------------------------------------
// Class-structure metrics

// Mean over samples of -log softmax(f^T mu)_y with class means from the same split.
inline double mean_classifier_ce(const Mat& feats, const std::vector<int>& labels) {
  detail::require_labels(feats, labels, "mean_classifier_ce");
  const int k = detail::count_classes(labels);
  const auto mu = detail::class_means(feats, labels, k, "mean_classifier_ce");
  Mat means(k, feats.cols());
  for (int c = 0; c < k; ++c) means.row(c) = mu[static_cast<std::size_t>(c)].transpose();
  const Mat logits = feats * means.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(feats.rows());
}

// E_y E_{x|y} |f(x) - mu_y|^2, classes weighted by frequency.
inline double conditional_variance(const Mat& feats, const std::vector<int>& labels) {
  detail::require_labels(feats, labels, "conditional_variance");
  const int k = detail::count_classes(labels);
  const auto mu = detail::class_means(feats, labels, k, "conditional_variance");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total += (feats.row(static_cast<Eigen::Index>(i)).transpose() - mu[static_cast<std::size_t>(labels[i])]).squaredNorm();
  return total / static_cast<double>(labels.size());
}

struct AlignmentUniformity {
  double alignment = 0.0;
  double uniformity = 0.0;
};

inline AlignmentUniformity alignment_uniformity(const Mat& z1, const Mat& z2, double t = 2.0) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw ShapeError("alignment_uniformity: view shapes differ");
  if ((z1.rowwise().norm().array() == 0.0).any() || (z2.rowwise().norm().array() == 0.0).any())
    throw DomainError("alignment_uniformity: zero-norm row");
  AlignmentUniformity out;
  out.alignment = (z1 - z2).rowwise().squaredNorm().mean();
  Mat pooled(2 * z1.rows(), z1.cols());
  pooled << z1, z2;
  out.uniformity = uniformity_sphere(Tensor(std::move(pooled)), t).item();
  return out;
}

// Minimum distance between class means over sqrt(conditional variance + 1e-12).
inline double separability(const Mat& feats, const std::vector<int>& labels) {
  detail::require_labels(feats, labels, "separability");
  const int k = detail::count_classes(labels);
  const auto mu = detail::class_means(feats, labels, k, "separability");
  if (k < 2) throw std::invalid_argument("separability needs at least 2 classes");
  double dmin = std::numeric_limits<double>::infinity();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) dmin = std::min(dmin, (mu[static_cast<std::size_t>(a)] - mu[static_cast<std::size_t>(b)]).norm());
  return dmin / std::sqrt(conditional_variance(feats, labels) + 1e-12);
}

}  // namespace glf
