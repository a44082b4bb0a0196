#include "glf/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

using namespace glf;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "glf_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Leave-one-out majority vote over the 5 nearest rows.
double loo_5nn(const Dataset& ds) {
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    std::vector<std::pair<double, int>> d;
    for (Eigen::Index j = 0; j < ds.features.rows(); ++j)
      if (j != i) d.emplace_back((ds.features.row(i) - ds.features.row(j)).squaredNorm(), ds.labels[static_cast<std::size_t>(j)]);
    std::partial_sort(d.begin(), d.begin() + 5, d.end());
    std::map<int, int> votes;
    for (int k = 0; k < 5; ++k) ++votes[d[static_cast<std::size_t>(k)].second];
    const auto best = std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) { return a.second < b.second; });
    hits += best->first == ds.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace

TEST(Generate, BlobsDeterministicAndSeparated) {
  SyntheticSpec spec;
  spec.samples_per_class = 20;
  spec.seed = 5;
  const Dataset a = generate(spec), b = generate(spec);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.size(), 80u);
  EXPECT_EQ(a.dim(), 32u);
  EXPECT_EQ(a.n_classes(), 4);
  spec.seed = 6;
  EXPECT_NE(generate(spec).features, a.features);
}

TEST(Generate, ZeroSpreadCollapsesToCenters) {
  SyntheticSpec spec;
  spec.spread = 0.0;
  spec.samples_per_class = 5;
  spec.class_separation = 4.0;
  const Dataset ds = generate(spec);
  std::vector<Eigen::RowVectorXd> centers;
  for (std::size_t c = 0; c < 4; ++c) {
    const Eigen::RowVectorXd first = ds.features.row(static_cast<Eigen::Index>(c * 5));
    for (std::size_t s = 0; s < 5; ++s) EXPECT_EQ(ds.features.row(static_cast<Eigen::Index>(c * 5 + s)), first);
    for (const auto& o : centers) EXPECT_GE((first - o).norm(), 4.0);
    centers.push_back(first);
  }
}

TEST(Generate, WellSeparatedBlobsAreNearlyPerfectForKnn) {
  SyntheticSpec spec;
  spec.n_classes = 3;
  spec.spread = 0.1;
  spec.class_separation = 10.0;
  spec.samples_per_class = 100;
  EXPECT_GE(loo_5nn(generate(spec)), 0.99);
}

TEST(Generate, OtherShapesAndPlacementFailure) {
  for (auto kind : {SyntheticKind::Moons, SyntheticKind::Rings}) {
    SyntheticSpec spec;
    spec.kind = kind;
    spec.n_classes = 2;
    spec.dim = 6;
    spec.samples_per_class = 30;
    spec.spread = 0.05;
    const Dataset ds = generate(spec);
    EXPECT_EQ(ds.size(), 60u);
    EXPECT_TRUE(ds.features.allFinite());
  }
  SyntheticSpec crowded;
  crowded.dim = 2;
  crowded.n_classes = 500;
  crowded.samples_per_class = 1;
  crowded.class_separation = 1.0;
  EXPECT_THROW(generate(crowded), std::runtime_error);
  crowded.n_classes = 1;
  EXPECT_THROW(generate(crowded), std::invalid_argument);
}

TEST(Split, DisjointAndSeeded) {
  SyntheticSpec spec;
  spec.samples_per_class = 10;
  const Dataset ds = generate(spec);
  const auto s = split_dataset(ds, 0.25, 3);
  EXPECT_EQ(s.test.size(), 10u);
  EXPECT_EQ(s.train.size(), 30u);
  EXPECT_EQ(split_dataset(ds, 0.25, 3).test.features, s.test.features);
  EXPECT_THROW(split_dataset(ds, 1.0, 3), std::invalid_argument);
}

TEST(Augment, IdentitySpecReturnsInput) {
  AugmentationSpec id{0.0, 0.0, 1.0, 1.0};
  std::mt19937_64 rng(1);
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::LinSpaced(6, -1, 1);
  const auto [a, b] = augment_pair(x, id, rng);
  EXPECT_EQ(a, x);
  EXPECT_EQ(b, x);
}

TEST(Augment, InvertedDropoutPreservesMean) {
  AugmentationSpec spec{0.0, 0.5, 1.0, 1.0};
  std::mt19937_64 rng(2);
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(1);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += augment_view(ones, spec, rng)(0);
  // Each draw is 0 or 2 with equal odds: sd 1, so 3 sigma of the mean is 0.03.
  EXPECT_NEAR(sum / n, 1.0, 0.03);
}

TEST(Augment, NoisyViewsDiffer) {
  std::mt19937_64 rng(3);
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::Ones(4);
  const auto [a, b] = augment_pair(x, {}, rng);
  EXPECT_NE(a, b);
  EXPECT_THROW((AugmentationSpec{0.0, 1.0, 1.0, 1.0}).validate(), std::invalid_argument);
}

TEST(Augment, DefaultsStayLocalRelativeToSeparation) {
  SyntheticSpec spec;
  spec.samples_per_class = 100;
  const Dataset ds = generate(spec);
  std::mt19937_64 rng(4);
  double dist = 0.0;
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    const Eigen::RowVectorXd x = ds.features.row(i);
    dist += (augment_view(x, {}, rng) - x).norm();
  }
  const double ratio = dist / static_cast<double>(ds.size()) / spec.class_separation;
  EXPECT_LT(ratio, 0.2);
}

TEST(Batches, DropsShortTailAndIsDeterministic) {
  Dataset ds{Mat::Random(10, 3), {}};
  BatchIterator it(ds, 4, 7);
  EXPECT_EQ(it.num_batches(), 2u);
  std::vector<std::size_t> sizes;
  while (auto b = it.next()) sizes.push_back(b->size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4}));

  BatchIterator a(ds, 4, 7), b(ds, 4, 7), c(ds, 4, 8);
  const Batch ba = *a.next(), bb = *b.next(), bc = *c.next();
  EXPECT_EQ(ba.view1, bb.view1);
  EXPECT_EQ(ba.view2, bb.view2);
  EXPECT_NE(ba.view1, bc.view1);
  EXPECT_TRUE(ba.labels.empty());

  Dataset eleven{Mat::Random(11, 3), {}};
  EXPECT_EQ(BatchIterator(eleven, 4, 0).num_batches(), 3u);
  EXPECT_THROW(BatchIterator(ds, 2, 0), std::invalid_argument);
}

TEST(Batches, LabelsTravelWithRowsButCanBeStripped) {
  SyntheticSpec spec;
  spec.samples_per_class = 3;
  const Dataset ds = generate(spec);
  BatchIterator it(ds, 5, 1);
  const Batch b = *it.next();
  ASSERT_EQ(b.labels.size(), 5u);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(b.labels[r], ds.labels[it.order()[r]]);
  EXPECT_TRUE(b.without_labels().labels.empty());
  EXPECT_EQ(b.without_labels().view1, b.view1);
}

TEST(Files, RawRoundTripIsBitwise) {
  const auto path = temp_path("table.glf").string();
  NumericTable t{Mat::Random(5, 3), {0, 1, 2, 1, 0}};
  t.features(0, 0) = -0.0;
  write_raw_f64(path, t);
  const NumericTable back = read_raw_f64(path);
  EXPECT_EQ(std::memcmp(back.features.data(), t.features.data(), sizeof(double) * 15), 0);
  EXPECT_EQ(back.labels, t.labels);
  {
    std::ofstream(path, std::ios::binary) << "GLF2";
  }
  EXPECT_THROW(read_raw_f64(path), FormatError);
}

TEST(Files, DelimitedTextParsesAndReportsBadLines) {
  const auto path = temp_path("table.csv").string();
  {
    std::ofstream(path) << "1.0,2.0,0\n3.0,4.0,1";
  }
  const NumericTable t = read_delimited_text(path, true);
  EXPECT_EQ(t.features, (Mat(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_EQ(t.labels, (std::vector<int>{0, 1}));
  {
    std::ofstream(path) << "1,2,3\n4,5,6\n7,8\n";
  }
  try {
    read_delimited_text(path, false);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}
