#include "glf/gradcheck.hpp"
#include "glf/losses.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace glf;

namespace {

Mat randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng, double shape = 1.0) {
  std::gamma_distribution<double> g(shape, 1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& x : p) s += (x = g(rng) + 1e-6);
  for (auto& x : p) x /= s;
  return p;
}

// Single-anchor context set with hand-picked distributions.
AnchorContextSet manual_context(const std::vector<double>& p_pre, const std::vector<double>& p_dat,
                                const std::vector<double>& p_cal) {
  const auto k = static_cast<Eigen::Index>(p_pre.size());
  AnchorContextSet ctx;
  ctx.anchors = {0};
  ctx.batch_size = p_pre.size() + 1;
  ctx.p_pre = Eigen::Map<const Mat>(p_pre.data(), 1, k);
  ctx.p_cal = Eigen::Map<const Mat>(p_cal.data(), 1, k);
  ctx.log_p_cal = ctx.p_cal.array().log().matrix();
  ctx.log_p_dat = Tensor(Mat(Eigen::Map<const Mat>(p_dat.data(), 1, k).array().log().matrix()));
  ctx.weights = {1.0};
  return ctx;
}

double info_nce_reference(const Mat& z1, const Mat& z2, double tau) {
  const auto m = z1.rows();
  Mat z(2 * m, z1.cols());
  z << z1, z2;
  z = z.rowwise().normalized().eval();
  double total = 0.0;
  for (Eigen::Index i = 0; i < 2 * m; ++i) {
    const Eigen::Index pos = i < m ? i + m : i - m;
    double denom = 0.0;
    for (Eigen::Index j = 0; j < 2 * m; ++j)
      if (j != i) denom += std::exp(z.row(i).dot(z.row(j)) / tau);
    total += -std::log(std::exp(z.row(i).dot(z.row(pos)) / tau) / denom);
  }
  return total / static_cast<double>(2 * m);
}

}  // namespace

TEST(InfoNce, SinglePairHasNoNegatives) {
  const Mat z = randn(1, 3, 1);
  EXPECT_NEAR(info_nce(Tensor(z), Tensor(z), 0.5).item(), 0.0, 1e-15);
}

TEST(InfoNce, OrthogonalRowsHandValue) {
  Mat z(2, 2);
  z << 1, 0, 0, 1;
  EXPECT_NEAR(info_nce(Tensor(z), Tensor(z), 1.0).item(), std::log(1.0 + 2.0 / std::exp(1.0)), 1e-14);
}

TEST(InfoNce, MatchesLoopReference) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Mat a = randn(6, 4, s), b = randn(6, 4, s + 100);
    EXPECT_NEAR(info_nce(Tensor(a), Tensor(b), 0.3).item(), info_nce_reference(a, b, 0.3), 1e-12);
  }
}

TEST(InfoNce, DecreasesWhenPositiveAligns) {
  const Mat a = randn(4, 3, 7);
  Mat b = randn(4, 3, 8);
  const double before = info_nce(Tensor(a), Tensor(b), 0.5).item();
  b.row(0) = 0.5 * b.row(0) + 0.5 * a.row(0) * (b.row(0).norm() / a.row(0).norm());
  EXPECT_LT(info_nce(Tensor(a), Tensor(b), 0.5).item(), before);
  EXPECT_THROW(info_nce(Tensor(a), Tensor(Mat::Zero(4, 3)), 0.5), DomainError);
}

TEST(AlignOnly, Examples) {
  const Mat z = randn(5, 3, 2);
  EXPECT_NEAR(align_only(Tensor(z), Tensor(z), 0.5).item(), -2.0, 1e-14);
  Mat a(2, 2), b(2, 2);
  a << 1, 0, 0, 1;
  b << 0, 1, 1, 0;
  EXPECT_NEAR(align_only(Tensor(a), Tensor(b), 0.5).item(), 0.0, 1e-15);
  // cos = 0.8 and 0.4
  b << 0.8, 0.6, 0.0, 0.0;
  b(1, 0) = std::sqrt(1.0 - 0.16);
  b(1, 1) = 0.4;
  EXPECT_NEAR(align_only(Tensor(a), Tensor(b), 0.5).item(), -1.2, 1e-14);
}

TEST(Uniformity, Examples) {
  Mat same(3, 2);
  same << 1, 0, 1, 0, 1, 0;
  EXPECT_NEAR(uniformity_sphere(Tensor(same)).item(), 0.0, 1e-15);
  Mat anti(2, 2);
  anti << 1, 0, -1, 0;
  EXPECT_NEAR(uniformity_sphere(Tensor(anti), 2.0).item(), -8.0, 1e-14);
  Mat split = same;
  split.row(2) << 0, 1;
  EXPECT_LT(uniformity_sphere(Tensor(split)).item(), 0.0);
  EXPECT_THROW(uniformity_sphere(Tensor(Mat(1, 2))), ShapeError);
}

TEST(SimSiam, IdentityPredictorPerfectAlignment) {
  const Mat z = randn(4, 8, 3);
  const Predictor id = [](const Tensor& t) { return t; };
  EXPECT_NEAR(simsiam_align(Tensor(z), Tensor(z), id).item(), -1.0, 1e-14);
}

TEST(SimSiam, StopGradientBranchCarriesNoGradient) {
  const Mat v1 = randn(4, 8, 4), v2 = randn(4, 8, 5), w = randn(8, 8, 6);
  Mat g_full, g_manual;
  {
    Tape tape;
    const Tensor z1 = tape.leaf(v1), z2 = tape.leaf(v2);
    const Predictor p = [&](const Tensor& t) { return matmul(t, Tensor(w)); };
    tape.backward(simsiam_align(z1, z2, p));
    g_full = tape.grad(z1);
  }
  {
    // Same objective with the target branch written as constants.
    Tape tape;
    const Tensor z1 = tape.leaf(v1), z2 = tape.leaf(v2);
    const Tensor p1 = l2_normalize_rows(matmul(z1, Tensor(w))), p2 = l2_normalize_rows(matmul(z2, Tensor(w)));
    const Tensor t1(Mat(v1.rowwise().normalized())), t2(Mat(v2.rowwise().normalized()));
    tape.backward((sum(mul(p1, t2)) + sum(mul(p2, t1))) * (-0.5 / 4.0));
    g_manual = tape.grad(z1);
  }
  EXPECT_TRUE((g_full - g_manual).isZero(1e-15));
}

TEST(SimSiam, GradientMatchesFiniteDifferences) {
  const Mat z2 = randn(4, 8, 7), w = randn(8, 8, 8);
  const auto res = finite_difference_check(
      [&](const Tensor& z1) { return simsiam_align(z1, Tensor(z2), [&](const Tensor& t) { return matmul(t, Tensor(w)); }); },
      randn(4, 8, 9));
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(BarlowTwins, WhitenedExamples) {
  Mat z(4, 2);
  z << 1, 1, 1, -1, -1, 1, -1, -1;
  EXPECT_NEAR(barlow_twins(Tensor(z), Tensor(z), 5e-3).item(), 0.0, 1e-9);
  EXPECT_NEAR(barlow_twins(Tensor(z), Tensor(Mat(-z)), 0.0).item(), 8.0, 1e-4);
  const Mat a = randn(6, 3, 10), b = randn(6, 3, 11);
  const double full = barlow_twins(Tensor(a), Tensor(b), 1.0).item();
  const double diag = barlow_twins(Tensor(a), Tensor(b), 0.0).item();
  EXPECT_GT(full, diag);
  EXPECT_THROW(barlow_twins(Tensor(Mat(1, 2)), Tensor(Mat(1, 2)), 0.0), ShapeError);
}

TEST(AnchorContexts, SymmetricTripleIsUniform) {
  Mat z(3, 1);
  z << 0, -1, 1;
  ContextOptions o;
  o.anchors = {0};
  const auto ctx = build_anchor_contexts(Tensor(z), Tensor(z), o);
  const auto c = ctx.context(0);
  for (const auto* d : {&c.p_cal, &c.p_dat, &c.p_pre}) {
    ASSERT_EQ(d->probs.size(), 2u);
    EXPECT_NEAR(d->probs[0], 0.5, 1e-15);
    EXPECT_NEAR(d->probs[1], 0.5, 1e-15);
  }
  EXPECT_NEAR(c.weight, 1.0 / std::log(2.0), 1e-12);
  EXPECT_THROW(build_anchor_contexts(Tensor(Mat(2, 1)), Tensor(Mat(2, 1)), {}), ShapeError);
}

TEST(AnchorContexts, EquidistantPriorGivesLogSupportEntropy) {
  // Origin plus the standard basis: the covariance is permutation-symmetric,
  // so every basis vector is equally far from the origin.
  for (int k : {3, 5, 9}) {
    Mat z = Mat::Zero(k + 1, k);
    z.bottomRows(k) = Mat::Identity(k, k);
    ContextOptions o;
    o.anchors = {0};
    const auto ctx = build_anchor_contexts(Tensor(z), Tensor(z), o);
    const double h = shannon_entropy(ctx.context(0).p_pre);
    EXPECT_NEAR(h, std::log(static_cast<double>(k)), 1e-12);
    EXPECT_NEAR(ctx.weights[0], 1.0 / std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(AnchorContexts, DistributionsNormalizedAndSupportShared) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Mat z = randn(10, 4, s), zp = randn(10, 6, s + 50);
    const auto ctx = build_anchor_contexts(Tensor(z), Tensor(zp), {});
    ASSERT_EQ(ctx.size(), 10u);
    for (const auto& c : ctx.contexts()) {
      EXPECT_NEAR(c.p_cal.sum(), 1.0, 1e-9);
      EXPECT_NEAR(c.p_dat.sum(), 1.0, 1e-9);
      EXPECT_NEAR(c.p_pre.sum(), 1.0, 1e-9);
      EXPECT_EQ(c.p_cal.probs.size(), 9u);
      EXPECT_GT(c.weight, 0.0);
    }
    for (double kl : dcm_per_anchor(ctx)) EXPECT_GE(kl, -1e-12);
  }
}

TEST(AnchorContexts, OutlierAnchorHasLowWeight) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Mat z = randn(16, 4, s);
    z.row(15) = Mat::Constant(1, 4, 40.0);
    const auto ctx = build_anchor_contexts(Tensor(z), Tensor(z), {});
    std::vector<double> inliers(ctx.weights.begin(), ctx.weights.end() - 1);
    std::nth_element(inliers.begin(), inliers.begin() + 7, inliers.end());
    EXPECT_LT(ctx.weights[15], inliers[7]) << "seed " << s;
  }
}

TEST(Dcm, ZeroWhenDistributionsMatch) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  const auto ctx = manual_context(p, p, p);
  EXPECT_NEAR(dcm_loss(ctx).item(), 0.0, 1e-12);
  EXPECT_NEAR(dcm_per_anchor(ctx)[0], 0.0, 1e-12);
}

TEST(Dcm, OneDimensionalReferenceValue) {
  // Anchor 0 with neighbours 1 and 3, Sigma = 1, rho = 4 (Sigma' = 2).
  // Reference: p_cal ~ exp(-d^2 / 2), p_dat ~ (1 + d^2 / 8)^(-5/2).
  Mat z(3, 1);
  z << 0, 1, 3;
  ContextOptions o;
  o.anchors = {0};
  o.covariance = CovarianceEstimate::from_matrix(Mat::Identity(1, 1));
  const auto ctx = build_anchor_contexts(Tensor(z), Tensor(z), o);
  EXPECT_NEAR(ctx.p_cal(0, 0), 0.9820137900379085, 1e-12);
  EXPECT_NEAR(std::exp(ctx.log_p_dat.value()(0, 0)), 0.830612151919851, 1e-12);
  EXPECT_NEAR(dcm_per_anchor(ctx)[0], 0.12409511856454716, 1e-12);
  EXPECT_NEAR(dcm_loss(ctx).item(), ctx.weights[0] * 0.12409511856454716, 1e-12);
}

TEST(Dcm, GradientStepPullsNearAndPushesFar) {
  Mat v(3, 1);
  v << 0, 1, 3;
  Tape tape;
  const Tensor z = tape.leaf(v);
  ContextOptions o;
  o.anchors = {0};
  o.covariance = CovarianceEstimate::from_matrix(Mat::Identity(1, 1));
  tape.backward(dcm_loss(build_anchor_contexts(z, Tensor(v), o)));
  const Mat after = v - 1e-3 * tape.grad(z);
  EXPECT_LT(std::abs(after(1, 0) - after(0, 0)), 1.0);
  EXPECT_GT(std::abs(after(2, 0) - after(0, 0)), 3.0);
}

TEST(Lpm, ShiftedValueAtPriorAndGibbsOptimality) {
  std::mt19937_64 rng(17);
  for (std::size_t k : {3u, 7u, 15u}) {
    const auto p = random_simplex(k, rng);
    const double at_prior = lpm_loss(manual_context(p, p, p)).item();
    double h = 0.0, lb = 0.0, s = 0.0;
    for (double x : p) {
      h -= x * std::log(x);
      lb += std::lgamma(x + 1.0);
      s += x + 1.0;
    }
    lb -= std::lgamma(s);
    EXPECT_NEAR(at_prior, -h - lb, 1e-10);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto q = random_simplex(k, rng);
      std::uniform_real_distribution<double> u(0.01, 1.0);
      const double t = u(rng);
      std::vector<double> mix(k);
      for (std::size_t j = 0; j < k; ++j) mix[j] = (1.0 - t) * p[j] + t * q[j];
      EXPECT_LT(lpm_loss(manual_context(p, mix, p)).item(), at_prior);
    }
  }
}

TEST(Lpm, TwoOutcomeMaximizerMatchesLagrange) {
  const std::vector<double> p{0.75, 0.25};
  const double best = lpm_loss(manual_context(p, p, p)).item();
  EXPECT_NEAR(best, 0.31348499338343494, 1e-12);
  for (double b = 0.05; b < 0.999; b += 0.01) {
    if (std::abs(b - 0.75) < 1e-9) continue;
    EXPECT_LT(lpm_loss(manual_context(p, {b, 1.0 - b}, p)).item(), best);
  }
}

TEST(Lpm, FlatDirichletHasZeroGradient) {
  const std::vector<double> half{0.5, 0.5};
  LpmOptions o;
  o.variant = LpmVariant::Concentrated;
  o.concentration = 2.0;
  Tape tape;
  auto ctx = manual_context(half, half, half);
  const Tensor logits = tape.leaf(Mat((Mat(1, 2) << 0.3, -0.4).finished()));
  ctx.log_p_dat = log_softmax_rows(logits);
  const Tensor l = lpm_loss(ctx, o);
  EXPECT_NEAR(l.item(), 0.0, 1e-12);  // log density of Dir(1, 1) is 0
  tape.backward(l);
  EXPECT_TRUE(tape.grad(logits).isZero(1e-15));
}

TEST(Lpm, LiteralVariantIsDensitySum) {
  const std::vector<double> pre{0.6, 0.3, 0.1}, dat{0.5, 0.3, 0.2};
  LpmOptions o;
  o.variant = LpmVariant::Literal;
  EXPECT_NEAR(lpm_loss(manual_context(pre, dat, pre), o).item(), std::exp(dirichlet_logpdf(dat, pre)), 1e-12);
}

TEST(Lpm, ClampEventsAreCounted) {
  const std::vector<double> pre{0.5, 0.5}, dat{1.0 - 1e-12, 1e-12};
  LpmStats st;
  const double v = lpm_loss(manual_context(pre, dat, pre), {}, &st).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(st.clamp_events, 1u);
}

TEST(Baselines, Examples) {
  ConstrainingPartSpec spec;
  // (b) on the exact quantile grid
  Mat grid(4, 2);
  grid << -0.75, 0.25, -0.25, -0.75, 0.25, 0.75, 0.75, -0.25;
  EXPECT_NEAR(constraint_baseline(Tensor(grid), ConstrainingKind::UniformCube, spec).item(), 0.0, 1e-15);

  // (d) with zero batch mean
  Mat z = randn(8, 3, 20);
  z = (z.rowwise() - z.colwise().mean()).eval();
  const double expect = 0.5 * z.rowwise().squaredNorm().mean() + 1.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(constraint_baseline(Tensor(z), ConstrainingKind::GaussIdentity, spec).item(), expect, 1e-12);

  // (c) equals the mean Gaussian log-density under the shrunk covariance
  const auto cov = estimate_covariance(z, spec.lambda_shrink);
  double nll = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) nll -= gaussian_logpdf(z.row(i).transpose(), Vec::Zero(3), cov);
  EXPECT_NEAR(constraint_baseline(Tensor(z), ConstrainingKind::GaussFull, spec).item(), nll / 8.0, 1e-10);

  EXPECT_THROW(constraint_baseline(Tensor(Mat(1, 3)), ConstrainingKind::GaussFull, spec), ShapeError);
  EXPECT_THROW(constraint_baseline(Tensor(z), ConstrainingKind::Adc, spec), std::invalid_argument);
}

TEST(Baselines, MixtureBeatsGlobalGaussianOnTwoBlobs) {
  Mat z = randn(40, 2, 21, 0.05);
  z.topRows(20).col(0).array() += 5.0;
  ConstrainingPartSpec spec;
  BaselineStats st;
  const double e = constraint_baseline(Tensor(z), ConstrainingKind::GaussMixture, spec, &st).item();
  const double d = constraint_baseline(Tensor(z), ConstrainingKind::GaussIdentity, spec).item();
  EXPECT_EQ(st.n_clusters, 2);
  EXPECT_FALSE(st.all_noise);
  EXPECT_LT(e, d);
}

TEST(Baselines, AllNoiseMixtureIsZeroWithFlag) {
  Mat z(3, 1);
  z << 0, 10, 20;
  ConstrainingPartSpec spec;
  BaselineStats st;
  EXPECT_EQ(constraint_baseline(Tensor(z), ConstrainingKind::GaussMixture, spec, &st).item(), 0.0);
  EXPECT_TRUE(st.all_noise);
}

TEST(Baselines, GradientsMatchFiniteDifferences) {
  ConstrainingPartSpec spec;
  spec.dbscan_eps = 1.5;
  spec.dbscan_min_pts = 2;
  for (auto kind : {ConstrainingKind::UniformCube, ConstrainingKind::GaussFull, ConstrainingKind::GaussIdentity,
                    ConstrainingKind::GaussMixture}) {
    const auto res = finite_difference_check([&](const Tensor& t) { return constraint_baseline(t, kind, spec); },
                                             randn(8, 3, 22));
    EXPECT_LT(res.max_rel_error, 1e-6);
  }
  const auto res = finite_difference_check(
      [&](const Tensor& t) { return constraint_baseline(l2_normalize_rows(t), ConstrainingKind::UniformSphere, spec); },
      randn(8, 3, 23));
  EXPECT_LT(res.max_rel_error, 1e-6);
}

TEST(TotalObjective, ZeroWeightsReturnAligningLossBitwise) {
  const Mat a = randn(6, 4, 30), b = randn(6, 4, 31);
  const Tensor l_ctr = info_nce(Tensor(a), Tensor(b), 0.5);
  Mat z(12, 4);
  z << a, b;
  const auto ctx = build_anchor_contexts(Tensor(z), Tensor(z), {});
  const auto out = total_objective(l_ctr, ctx, 0.0, 0.0);
  EXPECT_EQ(out.total.item(), l_ctr.item());
  EXPECT_EQ(out.l_dcm, 0.0);
  EXPECT_EQ(out.l_lpm, 0.0);
  EXPECT_THROW(total_objective(l_ctr, ctx, -1.0, 0.0), std::invalid_argument);
}

TEST(TotalObjective, MatchedCalibrationAddsNothing) {
  const std::vector<double> p{0.1, 0.6, 0.3};
  const auto ctx = manual_context(p, p, p);
  const Tensor l_ctr = Tensor::scalar(1.25);
  EXPECT_NEAR(total_objective(l_ctr, ctx, 1.0, 0.0).total.item(), 1.25, 1e-12);
}

TEST(TotalObjective, CombinesTermsAndMatchesFiniteDifferences) {
  const Mat v = randn(6, 4, 32);
  const auto ctx = build_anchor_contexts(Tensor(v), Tensor(v), {});
  const auto out = total_objective(Tensor::scalar(0.5), ctx, 2.0, 3.0);
  EXPECT_NEAR(out.total.item(), 0.5 + 2.0 * out.l_dcm - 3.0 * out.l_lpm, 1e-12);

  const auto res = finite_difference_check(
      [](const Tensor& t) {
        const auto c = build_anchor_contexts(t, stop_gradient(t), {});
        return total_objective(info_nce(slice_rows(t, 0, 3), slice_rows(t, 3, 3), 0.5), c, 1.0, 1.0).total;
      },
      v);
  EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(StopGradient, LeafAuditOnCompositeObjective) {
  const Mat v = randn(8, 4, 33), vp = randn(8, 5, 34);
  Tape tape;
  const Tensor z = tape.leaf(v);
  const Tensor cal = tape.leaf(v);
  const Tensor pre = tape.leaf(vp);
  const auto ctx = build_anchor_contexts(z, pre, {}, cal);
  tape.backward(total_objective(Tensor::scalar(0.0), ctx, 1.0, 1.0).total);
  EXPECT_FALSE(tape.grad(z).isZero(0));
  EXPECT_TRUE(tape.grad(cal).isZero(0));
  EXPECT_TRUE(tape.grad(pre).isZero(0));
}
