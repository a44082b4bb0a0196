#pragma once

#include "glf/autodiff.hpp"

#include <algorithm>
#include <deque>
#include <vector>

namespace glf {

struct ClusterAssignment {
  static constexpr int kNoise = -1;
  std::vector<int> labels;
  int n_clusters = 0;
};

struct ClusterMoments {
  Vec mean;
  double variance = 0.0;  // isotropic, per coordinate
  std::size_t size = 0;
};

// Classic DBSCAN with Euclidean distance. A point is core when at least
// min_pts points (itself included) lie within eps. Clusters are expanded in
// index order; a border point joins the first cluster that reaches it.
inline ClusterAssignment dbscan(const Mat& points, double eps, std::size_t min_pts) {
  if (points.rows() < 1) throw ShapeError("dbscan needs at least one point");
  if (!(eps > 0.0)) throw DomainError("dbscan eps must be positive");
  if (min_pts < 1) throw DomainError("dbscan min_pts must be >= 1");
  const auto m = static_cast<std::size_t>(points.rows());
  const double eps2 = eps * eps;

  std::vector<std::vector<std::size_t>> neighbors(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d2 = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm();
      if (d2 <= eps2) neighbors[i].push_back(j);
    }
  }

  constexpr int kUnvisited = -2;
  ClusterAssignment out;
  out.labels.assign(m, kUnvisited);
  for (std::size_t i = 0; i < m; ++i) {
    if (out.labels[i] != kUnvisited) continue;
    if (neighbors[i].size() < min_pts) {
      out.labels[i] = ClusterAssignment::kNoise;
      continue;
    }
    const int c = out.n_clusters++;
    out.labels[i] = c;
    std::deque<std::size_t> frontier(neighbors[i].begin(), neighbors[i].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (out.labels[q] == ClusterAssignment::kNoise) out.labels[q] = c;  // border point
      if (out.labels[q] != kUnvisited) continue;
      out.labels[q] = c;
      if (neighbors[q].size() >= min_pts) frontier.insert(frontier.end(), neighbors[q].begin(), neighbors[q].end());
    }
  }
  return out;
}

// Per-cluster mean and isotropic variance (mean squared deviation per
// coordinate, floored). Noise points are ignored.
inline std::vector<ClusterMoments> cluster_moments(const Mat& points, const ClusterAssignment& assignment,
                                                   double variance_floor = 1e-6) {
  if (assignment.labels.size() != static_cast<std::size_t>(points.rows()))
    throw ShapeError("cluster_moments: assignment does not match points");
  const auto k = points.cols();
  std::vector<ClusterMoments> out(static_cast<std::size_t>(assignment.n_clusters));
  for (auto& c : out) c.mean = Vec::Zero(k);
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    const int l = assignment.labels[i];
    if (l < 0) continue;
    out[static_cast<std::size_t>(l)].mean += points.row(static_cast<Eigen::Index>(i)).transpose();
    ++out[static_cast<std::size_t>(l)].size;
  }
  for (auto& c : out) c.mean /= static_cast<double>(c.size);
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    const int l = assignment.labels[i];
    if (l < 0) continue;
    auto& c = out[static_cast<std::size_t>(l)];
    c.variance += (points.row(static_cast<Eigen::Index>(i)).transpose() - c.mean).squaredNorm();
  }
  for (auto& c : out) c.variance = std::max(variance_floor, c.variance / static_cast<double>(c.size * static_cast<std::size_t>(k)));
  return out;
}

}  // namespace glf
