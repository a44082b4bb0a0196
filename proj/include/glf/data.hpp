#pragma once

// Synthetic datasets, two-view augmentation and seeded batching.

#include "glf/autodiff.hpp"
#include "glf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace glf {

struct Dataset {
  Mat features;
  std::vector<int> labels;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  int n_classes() const { return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1; }
};

enum class SyntheticKind { Blobs, Moons, Rings };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Blobs;
  std::size_t n_classes = 4;
  std::size_t dim = 32;
  std::size_t samples_per_class = 500;
  double class_separation = 3.0;
  double spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_classes < 2) throw std::invalid_argument("dataset.n_classes must be >= 2");
    if (dim < 2) throw std::invalid_argument("dataset.dim must be >= 2");
    if (samples_per_class < 1) throw std::invalid_argument("dataset.samples_per_class must be >= 1");
    if (!(spread >= 0.0)) throw std::invalid_argument("dataset.spread must be >= 0");
    if (!(class_separation >= 0.0)) throw std::invalid_argument("dataset.class_separation must be >= 0");
  }
};

// SplitMix64 finalizer; derives independent stream seeds from counters.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = mix_seed(h ^ mix_seed(p));
  return h;
}

namespace detail {

inline Mat random_rotation(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  return qr.householderQ();
}

// Class-c point of a 2-D shape before embedding.
inline Eigen::Vector2d shape_point(SyntheticKind kind, std::size_t c, double sep, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (kind == SyntheticKind::Moons) {
    const double t = std::numbers::pi * u(rng);
    const double r = std::max(sep, 1.0);
    const bool flip = c % 2 == 1;
    const double x = r * std::cos(t) + (flip ? r : 0.0) + static_cast<double>(c / 2) * 3.0 * r;
    const double y = flip ? r * 0.5 - r * std::sin(t) : r * std::sin(t);
    return {x, y};
  }
  const double t = 2.0 * std::numbers::pi * u(rng);
  const double radius = static_cast<double>(c + 1) * std::max(sep, 1e-9);
  return {radius * std::cos(t), radius * std::sin(t)};
}

}  // namespace detail

inline Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.n_classes * spec.samples_per_class);
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  Dataset ds;
  ds.features = Mat(n, dim);
  ds.labels.resize(static_cast<std::size_t>(n));

  if (spec.kind == SyntheticKind::Blobs) {
    // Rejection-sample centers in a cube sized so typical spacing is near the
    // requested separation; the cube grows slowly if placement keeps failing.
    double half = spec.class_separation * 1.2 * std::sqrt(1.5 / static_cast<double>(dim));
    std::vector<Vec> centers;
    constexpr int kMaxAttempts = 10000;
    for (int attempts = 1; centers.size() < spec.n_classes; ++attempts) {
      if (attempts > kMaxAttempts)
        throw std::runtime_error("generate: could not place blob centers at separation " +
                                 std::to_string(spec.class_separation));
      if (attempts % 500 == 0) {
        half *= 1.1;
        centers.clear();
      }
      std::uniform_real_distribution<double> u(-half, half);
      Vec c(dim);
      for (Eigen::Index i = 0; i < dim; ++i) c(i) = u(rng);
      bool ok = true;
      for (const auto& o : centers) ok = ok && (c - o).norm() >= spec.class_separation;
      if (ok) centers.push_back(std::move(c));
    }
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
        for (Eigen::Index i = 0; i < dim; ++i) ds.features(row, i) = centers[c](i) + spec.spread * n01(rng);
        ds.labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
      }
    }
    return ds;
  }

  const Mat rot = detail::random_rotation(spec.dim, rng);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      const Eigen::Vector2d p = detail::shape_point(spec.kind, c, spec.class_separation, rng);
      Eigen::RowVectorXd x(dim);
      x(0) = p.x() + spec.spread * n01(rng);
      x(1) = p.y() + spec.spread * n01(rng);
      for (Eigen::Index i = 2; i < dim; ++i) x(i) = spec.spread * n01(rng);
      ds.features.row(row) = x * rot;
      ds.labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
    }
  }
  return ds;
}

inline Dataset from_table(NumericTable t) {
  Dataset ds;
  ds.features = std::move(t.features);
  ds.labels = std::move(t.labels);
  return ds;
}

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

// Seeded shuffle, then the first round(test_fraction * n) rows become the test split.
inline DatasetSplit split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must be in [0, 1)");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed({seed, 0x5e11ULL}));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  auto take = [&](std::size_t from, std::size_t to) {
    Dataset out;
    out.features = Mat(static_cast<Eigen::Index>(to - from), ds.features.cols());
    for (std::size_t i = from; i < to; ++i) {
      out.features.row(static_cast<Eigen::Index>(i - from)) = ds.features.row(static_cast<Eigen::Index>(idx[i]));
      if (!ds.labels.empty()) out.labels.push_back(ds.labels[idx[i]]);
    }
    return out;
  };
  return {take(n_test, ds.size()), take(0, n_test)};
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentationSpec {
  double noise_sigma = 0.05;
  double dropout_p = 0.01;
  double scale_min = 0.98;
  double scale_max = 1.02;

  void validate() const {
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("augment.noise_sigma must be >= 0");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("augment.dropout_p must be in [0, 1)");
    if (!(scale_min > 0.0 && scale_max >= scale_min)) throw std::invalid_argument("augment scale range must lie in (0, inf)");
  }
};

// One view: (x * mask / (1 - p)) * s + noise.
inline Eigen::RowVectorXd augment_view(const Eigen::RowVectorXd& x, const AugmentationSpec& spec, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - spec.dropout_p);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double s = spec.scale_min == spec.scale_max ? spec.scale_min
                                                    : std::uniform_real_distribution<double>(spec.scale_min, spec.scale_max)(rng);
  Eigen::RowVectorXd v(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double xi = x(i);
    if (spec.dropout_p > 0.0) xi = keep(rng) ? xi / (1.0 - spec.dropout_p) : 0.0;
    v(i) = xi * s + (spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0);
  }
  return v;
}

inline std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> augment_pair(const Eigen::RowVectorXd& x,
                                                                      const AugmentationSpec& spec, std::mt19937_64& rng) {
  auto a = augment_view(x, spec, rng);
  auto b = augment_view(x, spec, rng);
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Batching

struct Batch {
  Mat ancestors;
  Mat view1;
  Mat view2;
  std::vector<int> labels;  // evaluation only

  std::size_t size() const { return static_cast<std::size_t>(ancestors.rows()); }

  Batch without_labels() const {
    Batch b{ancestors, view1, view2, {}};
    return b;
  }
};

inline constexpr std::size_t kMinBatch = 3;

// Seeded per-epoch shuffle; batches smaller than 3 are dropped. Augmentation
// for row r of batch b uses a stream seeded from (epoch_seed, b, r).
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed, AugmentationSpec aug = {})
      : ds_(ds), batch_size_(batch_size), epoch_seed_(epoch_seed), aug_(aug) {
    if (batch_size < kMinBatch) throw std::invalid_argument("batch_size must be >= 3");
    if (ds.size() < kMinBatch) throw std::invalid_argument("dataset has fewer than 3 samples");
    aug_.validate();
    order_.resize(ds.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed({epoch_seed, 0x5f1eULL}));
    std::shuffle(order_.begin(), order_.end(), rng);
  }

  std::size_t num_batches() const {
    const std::size_t full = order_.size() / batch_size_;
    const std::size_t rem = order_.size() % batch_size_;
    return full + (rem >= kMinBatch ? 1 : 0);
  }

  std::optional<Batch> next() {
    if (cursor_ >= num_batches()) return std::nullopt;
    const std::size_t b = cursor_++;
    const std::size_t start = b * batch_size_;
    const std::size_t len = std::min(batch_size_, order_.size() - start);
    const auto dim = ds_.features.cols();
    Batch batch;
    batch.ancestors = Mat(static_cast<Eigen::Index>(len), dim);
    batch.view1 = Mat(static_cast<Eigen::Index>(len), dim);
    batch.view2 = Mat(static_cast<Eigen::Index>(len), dim);
    for (std::size_t r = 0; r < len; ++r) {
      const auto src = static_cast<Eigen::Index>(order_[start + r]);
      const auto dst = static_cast<Eigen::Index>(r);
      const Eigen::RowVectorXd x = ds_.features.row(src);
      std::mt19937_64 rng(derive_seed({epoch_seed_, b, r}));
      auto [v1, v2] = augment_pair(x, aug_, rng);
      batch.ancestors.row(dst) = x;
      batch.view1.row(dst) = v1;
      batch.view2.row(dst) = v2;
      if (!ds_.labels.empty()) batch.labels.push_back(ds_.labels[static_cast<std::size_t>(src)]);
    }
    return batch;
  }

  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Dataset& ds_;
  std::size_t batch_size_;
  std::uint64_t epoch_seed_;
  AugmentationSpec aug_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace glf
