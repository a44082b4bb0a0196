#include "glf/clustering.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace glf;

namespace {

// Reference DBSCAN built from the definition: core points via a full distance
// matrix, clusters as connected components of the core graph (union-find),
// numbered by their lowest core index; border points take the lowest-numbered
// cluster with a core neighbor.
std::vector<int> reference_dbscan(const Mat& x, double eps, std::size_t min_pts) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cnt = 0;
    for (std::size_t j = 0; j < n; ++j) {
      near[i][j] = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm() <= eps;
      cnt += near[i][j];
    }
    core[i] = cnt >= min_pts;
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (core[i] && core[j] && near[i][j]) parent[find(i)] = find(j);
  std::vector<int> root_label(n, -1), labels(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const auto r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && near[i][j] && (best < 0 || labels[j] < best)) best = labels[j];
    labels[i] = best;
  }
  return labels;
}

Mat clustered_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.4);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  Mat centers(4, 2);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = u(rng);
  Mat x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (i % 7 == 0) {
      x.row(i) << u(rng), u(rng);  // background noise
    } else {
      x.row(i) = centers.row(i % 4);
      x(i, 0) += g(rng);
      x(i, 1) += g(rng);
    }
  }
  return x;
}

}  // namespace

TEST(Dbscan, AgreesWithReferenceOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mat x = clustered_points(200, seed);
    const auto got = dbscan(x, 0.35, 4);
    const auto want = reference_dbscan(x, 0.35, 4);
    EXPECT_EQ(got.labels, want) << "seed " << seed;
    EXPECT_EQ(got.n_clusters, *std::max_element(want.begin(), want.end()) + 1);
  }
}

TEST(Dbscan, TwoDistantBlobs) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  Mat x(40, 3);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = g(rng) + (i < 20 && j == 0 ? 100.0 : 0.0);
  const auto a = dbscan(x, 1.0, 3);
  EXPECT_EQ(a.n_clusters, 2);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), ClusterAssignment::kNoise), 0);
  EXPECT_EQ(a.labels[0], 0);
  EXPECT_EQ(a.labels[39], 1);
}

TEST(Dbscan, SparsePointsAreNoise) {
  Mat x(3, 1);
  x << 0, 10, 20;
  const auto a = dbscan(x, 1.0, 2);
  EXPECT_EQ(a.n_clusters, 0);
  for (int l : a.labels) EXPECT_EQ(l, ClusterAssignment::kNoise);
}

TEST(Dbscan, SelfCountsTowardMinPts) {
  Mat x(2, 1);
  x << 0, 0.5;
  EXPECT_EQ(dbscan(x, 1.0, 2).n_clusters, 1);
  EXPECT_EQ(dbscan(x, 1.0, 3).n_clusters, 0);
}

TEST(Dbscan, BorderJoinsFirstDiscoveredCluster) {
  // Point 4 is a border point reachable from the cores of both clusters.
  Mat x(9, 1);
  x << -2.2, -1.8, -1.4, -1.0, 0.0, 1.0, 1.4, 1.8, 2.2;
  const auto a = dbscan(x, 1.0, 4);
  EXPECT_EQ(a.n_clusters, 2);
  EXPECT_EQ(a.labels[4], 0);
  EXPECT_EQ(a.labels[5], 1);
}

TEST(Dbscan, RejectsBadParameters) {
  EXPECT_THROW(dbscan(Mat(0, 2), 1.0, 2), ShapeError);
  EXPECT_THROW(dbscan(Mat::Zero(3, 2), 0.0, 2), DomainError);
  EXPECT_THROW(dbscan(Mat::Zero(3, 2), 1.0, 0), DomainError);
}

TEST(ClusterMoments, MeansAndIsotropicVariance) {
  Mat x(4, 2);
  x << 0, 0, 2, 0, 10, 10, 10, 12;
  ClusterAssignment a{{0, 0, 1, 1}, 2};
  const auto m = cluster_moments(x, a);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_TRUE((m[0].mean - Vec((Vec(2) << 1, 0).finished())).isZero(0));
  EXPECT_DOUBLE_EQ(m[0].variance, 2.0 / 4.0);  // sum |x - mu|^2 = 2 over size * k = 4
  EXPECT_EQ(m[1].size, 2u);
}

TEST(ClusterMoments, SingletonUsesFloor) {
  Mat x(2, 3);
  x << 1, 2, 3, 9, 9, 9;
  ClusterAssignment a{{0, ClusterAssignment::kNoise}, 1};
  const auto m = cluster_moments(x, a);
  EXPECT_DOUBLE_EQ(m[0].variance, 1e-6);
  EXPECT_EQ(m[0].size, 1u);
}
