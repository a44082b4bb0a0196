#pragma once

// Aligning parts, constraining parts and the composite objective
//
//   L = L_ctr + nu * L_dcm - upsilon * L_lpm
//
// The calibration module compares, per anchor, a stop-gradient Gaussian
// neighbourhood distribution with a trainable Student-t one; the local
// preserving module scores the trainable distribution under a Dirichlet
// centred on the distribution induced by a frozen prior encoder.

#include "glf/autodiff.hpp"
#include "glf/clustering.hpp"
#include "glf/models.hpp"
#include "glf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace glf {

// ---------------------------------------------------------------------------
// Specs

enum class AligningKind { InfoNce, AlignOnly, SimSiam, BarlowTwins };

struct AligningPartSpec {
  AligningKind kind = AligningKind::InfoNce;
  double tau = 0.5;
  double lambda_bt = 5e-3;

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("aligning.tau must be > 0");
    if (!(lambda_bt >= 0.0)) throw std::invalid_argument("aligning.lambda_bt must be >= 0");
  }
};

enum class ConstrainingKind {
  None,
  Dcm,
  Lpm,
  Adc,
  UniformSphere,   // (a)
  UniformCube,     // (b)
  GaussFull,       // (c)
  GaussIdentity,   // (d)
  GaussMixture,    // (e)
};

enum class LpmVariant { Shifted, Literal, Concentrated };

struct ConstrainingPartSpec {
  ConstrainingKind kind = ConstrainingKind::None;
  double rho = 4.0;
  double lambda_shrink = 1e-3;
  double nu = 1e-6;
  double upsilon = 3e-3;
  double eps_entropy = 1e-2;
  LpmVariant lpm_variant = LpmVariant::Shifted;
  double lpm_concentration = 0.0;  // 0: use K + 1
  TForm t_form = TForm::Standard;
  double weight = 1.0;          // multiplier for baselines (a)-(e)
  double uniformity_t = 2.0;
  double dbscan_eps = 0.5;
  std::size_t dbscan_min_pts = 4;

  void validate() const {
    if (!(rho > 2.0)) throw std::invalid_argument("constraining.rho must be > 2");
    if (!(nu >= 0.0) || !(upsilon >= 0.0)) throw std::invalid_argument("constraining.nu/upsilon must be >= 0");
    if (!(eps_entropy > 0.0)) throw std::invalid_argument("constraining.eps_entropy must be > 0");
    if (!(lambda_shrink > 0.0)) throw std::invalid_argument("constraining.lambda_shrink must be > 0");
    if (!(weight >= 0.0)) throw std::invalid_argument("constraining.weight must be >= 0");
    if (!(dbscan_eps > 0.0) || dbscan_min_pts < 1) throw std::invalid_argument("constraining.dbscan_* invalid");
  }
};

// ---------------------------------------------------------------------------
// Aligning parts

namespace detail {

inline Tensor constant_like(const Mat& m) { return Tensor(m); }

}  // namespace detail

// Each of the 2m views is an anchor; its sibling view is the positive and the
// remaining 2m - 2 views are negatives. Similarities are cosine / tau.
inline Tensor info_nce(const Tensor& z1, const Tensor& z2, double tau) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw ShapeError("info_nce: view shapes differ");
  if (z1.rows() < 1) throw ShapeError("info_nce: empty batch");
  if (!(tau > 0.0)) throw DomainError("info_nce: tau must be > 0");
  const Eigen::Index m = z1.rows();
  const Tensor z = l2_normalize_rows(concat({z1, z2}, 0));
  const Tensor logits = matmul(z, transpose(z)) / tau;
  const Tensor log_p = log_softmax_rows(logits, /*exclude_diagonal=*/true);
  Mat positives = Mat::Zero(2 * m, 2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    positives(i, i + m) = 1.0;
    positives(i + m, i) = 1.0;
  }
  return -sum(mul(Tensor(std::move(positives)), log_p)) / static_cast<double>(2 * m);
}

// -(1/tau) * mean_i cos(z1_i, z2_i)
inline Tensor align_only(const Tensor& z1, const Tensor& z2, double tau) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw ShapeError("align_only: view shapes differ");
  if (!(tau > 0.0)) throw DomainError("align_only: tau must be > 0");
  const Tensor sims = sum(mul(l2_normalize_rows(z1), l2_normalize_rows(z2)));
  return sims * (-1.0 / (tau * static_cast<double>(z1.rows())));
}

// log of the mean over distinct pairs of exp(-t |z_i - z_j|^2).
inline Tensor uniformity_sphere(const Tensor& z, double t = 2.0) {
  const Eigen::Index m = z.rows();
  if (m < 2) throw ShapeError("uniformity_sphere needs at least 2 rows");
  const Tensor d = pairwise_sq_dists(z);
  std::vector<std::size_t> all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Tensor off = gather_offdiag(d, all);
  return log_sum_exp(off * (-t)) - std::log(static_cast<double>(m * (m - 1)));
}

using Predictor = std::function<Tensor(const Tensor&)>;

// -1/2 * mean[ cos(p(z1), Sg(z2)) + cos(p(z2), Sg(z1)) ]
inline Tensor simsiam_align(const Tensor& z1, const Tensor& z2, const Predictor& predictor) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw ShapeError("simsiam_align: view shapes differ");
  const Tensor p1 = l2_normalize_rows(predictor(z1));
  const Tensor p2 = l2_normalize_rows(predictor(z2));
  const Tensor t1 = l2_normalize_rows(stop_gradient(z1));
  const Tensor t2 = l2_normalize_rows(stop_gradient(z2));
  if (p1.cols() != t2.cols()) throw ShapeError("simsiam_align: predictor must map d -> d");
  const Tensor s = sum(mul(p1, t2)) + sum(mul(p2, t1));
  return s * (-0.5 / static_cast<double>(z1.rows()));
}

inline Tensor simsiam_align(const Tensor& z1, const Tensor& z2, const MLPSpec& spec, std::span<const Tensor> params) {
  return simsiam_align(z1, z2, [&](const Tensor& x) { return mlp_forward(spec, params, x); });
}

namespace detail {

// Per-column standardization over the batch (biased variance, eps in the divisor).
inline Tensor batch_standardize(const Tensor& z, double eps) {
  const double m = static_cast<double>(z.rows());
  const Tensor mu = col_sum(z) / m;
  const Tensor centered = sub(z, broadcast_rows(mu, z.rows()));
  const Tensor var = col_sum(square(centered)) / m;
  return div(centered, broadcast_rows(sqrt(var + eps), z.rows()));
}

}  // namespace detail

inline Tensor barlow_twins(const Tensor& z1, const Tensor& z2, double lambda_bt, double bn_eps = 1e-5) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw ShapeError("barlow_twins: view shapes differ");
  if (z1.rows() < 2) throw ShapeError("barlow_twins needs at least 2 rows");
  const Eigen::Index d = z1.cols();
  const Tensor c = matmul(transpose(detail::batch_standardize(z1, bn_eps)), detail::batch_standardize(z2, bn_eps)) /
                   static_cast<double>(z1.rows());
  const Mat eye = Mat::Identity(d, d);
  const Mat off = Mat::Ones(d, d) - eye;
  const Tensor on_diag = sum(square(mul(sub(Tensor(eye), c), Tensor(eye))));
  if (lambda_bt == 0.0) return on_diag;
  return on_diag + sum(square(mul(c, Tensor(off)))) * lambda_bt;
}

inline Tensor aligning_loss(const AligningPartSpec& spec, const Tensor& z1, const Tensor& z2,
                            const Predictor& predictor = nullptr) {
  switch (spec.kind) {
    case AligningKind::InfoNce: return info_nce(z1, z2, spec.tau);
    case AligningKind::AlignOnly: return align_only(z1, z2, spec.tau);
    case AligningKind::SimSiam:
      if (!predictor) throw std::invalid_argument("simsiam aligning part requires a predictor");
      return simsiam_align(z1, z2, predictor);
    case AligningKind::BarlowTwins: return barlow_twins(z1, z2, spec.lambda_bt);
  }
  throw std::invalid_argument("unknown aligning kind");
}

// ---------------------------------------------------------------------------
// Anchor contexts

struct AnchorContext {
  std::size_t anchor_index = 0;
  BatchDistribution p_cal;
  BatchDistribution p_dat;
  BatchDistribution p_pre;
  double weight = 1.0;
};

struct ContextOptions {
  double rho = 4.0;
  double lambda_shrink = 1e-3;
  double eps_entropy = 1e-2;
  TForm t_form = TForm::Standard;
  // Override the per-batch covariance estimates (Sigma, before t-scaling).
  std::optional<CovarianceEstimate> covariance;
  std::optional<CovarianceEstimate> prior_covariance;
  // Anchor subset; empty means every row is an anchor.
  std::vector<std::size_t> anchors;

  static ContextOptions from(const ConstrainingPartSpec& c) {
    ContextOptions o;
    o.rho = c.rho;
    o.lambda_shrink = c.lambda_shrink;
    o.eps_entropy = c.eps_entropy;
    o.t_form = c.t_form;
    return o;
  }
};

// Row a of each matrix is the distribution for anchors[a] over the other n-1
// batch members, in index order with the anchor skipped.
struct AnchorContextSet {
  std::vector<std::size_t> anchors;
  std::size_t batch_size = 0;
  Mat p_cal;          // detached
  Mat log_p_cal;      // detached; -inf never appears (log-softmax output)
  Tensor log_p_dat;   // tape-linked through the projections
  Mat p_pre;          // detached
  std::vector<double> weights;
  CovarianceEstimate covariance;
  CovarianceEstimate prior_covariance;

  std::size_t size() const { return anchors.size(); }

  AnchorContext context(std::size_t a) const {
    auto row = [](const Mat& m, std::size_t r) {
      const auto rr = static_cast<Eigen::Index>(r);
      return std::vector<double>(m.row(rr).data(), m.row(rr).data() + m.cols());
    };
    const Mat p_dat = log_p_dat.value().array().exp().matrix();
    return AnchorContext{anchors[a],
                         {anchors[a], row(p_cal, a), DistributionSource::Calibration},
                         {anchors[a], row(p_dat, a), DistributionSource::Data},
                         {anchors[a], row(p_pre, a), DistributionSource::Prior},
                         weights[a]};
  }

  std::vector<AnchorContext> contexts() const {
    std::vector<AnchorContext> out;
    for (std::size_t a = 0; a < size(); ++a) out.push_back(context(a));
    return out;
  }
};

namespace detail {

// Radial log-kernel of the t-density over gathered squared distances.
inline Tensor student_t_log_kernel(const Tensor& d2, double rho, Eigen::Index k, TForm form) {
  const Tensor u = form == TForm::Standard ? d2 / rho : d2;
  return log(u + 1.0) * (-0.5 * (rho + static_cast<double>(k)));
}

inline std::vector<std::size_t> resolve_anchors(const std::vector<std::size_t>& requested, Eigen::Index n) {
  if (requested.empty()) {
    std::vector<std::size_t> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  for (auto a : requested)
    if (a >= static_cast<std::size_t>(n)) throw ShapeError("anchor index out of range");
  return requested;
}

inline Mat row_softmax(const Mat& logits) {
  return log_softmax_rows(Tensor(logits)).value().array().exp().matrix();
}

}  // namespace detail

// Builds p_cal (Gaussian, Sg), p_dat (Student-t, tape-linked) and p_pre
// (Student-t on frozen prior features) for every anchor, plus the entropy
// weights 1 / max(H(p_pre), eps_entropy). `calibration_source` (defaults to
// z_proj) feeds the stop-gradient side: covariance estimation and p_cal.
inline AnchorContextSet build_anchor_contexts(const Tensor& z_proj, const Tensor& z_pre, const ContextOptions& opts,
                                              const std::optional<Tensor>& calibration_source = std::nullopt) {
  const Eigen::Index n = z_proj.rows();
  if (n < 3) throw ShapeError("build_anchor_contexts needs at least 3 rows");
  if (z_pre.rows() != n) throw ShapeError("build_anchor_contexts: prior batch is not row-aligned");
  if (!(opts.rho > 2.0)) throw DomainError("rho must exceed 2");

  AnchorContextSet ctx;
  ctx.batch_size = static_cast<std::size_t>(n);
  ctx.anchors = detail::resolve_anchors(opts.anchors, n);
  const Eigen::Index k = z_proj.cols();

  const Mat z_cal = stop_gradient(calibration_source ? *calibration_source : z_proj).value();
  if (z_cal.rows() != n || z_cal.cols() != k) throw ShapeError("calibration source shape differs from projections");
  ctx.covariance = opts.covariance ? *opts.covariance : estimate_covariance(z_cal, opts.lambda_shrink);
  if (ctx.covariance.dim() != k) throw ShapeError("covariance dimension mismatch");
  const CovarianceEstimate cov_t = scale_covariance(ctx.covariance, opts.rho);

  // Gaussian calibration side; normalizer cancels in the discretization.
  {
    const Mat d2 = pairwise_sq_dists(Tensor(Mat(z_cal * ctx.covariance.whitener))).value();
    const Mat gathered = gather_offdiag(Tensor(d2), ctx.anchors).value();
    ctx.log_p_cal = log_softmax_rows(Tensor(Mat(-0.5 * gathered))).value();
    ctx.p_cal = ctx.log_p_cal.array().exp().matrix();
  }

  // Student-t data side, differentiable in z_proj.
  {
    const Tensor w = matmul(z_proj, Tensor(cov_t.whitener));
    const Tensor d2 = gather_offdiag(pairwise_sq_dists(w), ctx.anchors);
    ctx.log_p_dat = log_softmax_rows(detail::student_t_log_kernel(d2, opts.rho, k, opts.t_form));
  }

  // Prior side.
  {
    const Mat zp = stop_gradient(z_pre).value();
    ctx.prior_covariance = opts.prior_covariance ? *opts.prior_covariance : estimate_covariance(zp, opts.lambda_shrink);
    if (ctx.prior_covariance.dim() != zp.cols()) throw ShapeError("prior covariance dimension mismatch");
    const CovarianceEstimate prior_t = scale_covariance(ctx.prior_covariance, opts.rho);
    const Mat d2 = pairwise_sq_dists(Tensor(Mat(zp * prior_t.whitener))).value();
    const Tensor gathered(gather_offdiag(Tensor(d2), ctx.anchors).value());
    const Mat kernel = detail::student_t_log_kernel(gathered, opts.rho, zp.cols(), opts.t_form).value();
    ctx.p_pre = detail::row_softmax(kernel);
  }

  ctx.weights.resize(ctx.anchors.size());
  for (std::size_t a = 0; a < ctx.anchors.size(); ++a) {
    const auto r = static_cast<Eigen::Index>(a);
    double h = 0.0;
    for (Eigen::Index j = 0; j < ctx.p_pre.cols(); ++j) {
      const double p = ctx.p_pre(r, j);
      if (p > 0.0) h -= p * std::log(p);
    }
    ctx.weights[a] = 1.0 / std::max(h, opts.eps_entropy);
  }
  return ctx;
}

// Per-anchor KL(p_cal || p_dat), unweighted, from current values.
inline std::vector<double> dcm_per_anchor(const AnchorContextSet& ctx) {
  std::vector<double> out(ctx.size(), 0.0);
  const Mat& lp = ctx.log_p_dat.value();
  for (std::size_t a = 0; a < ctx.size(); ++a) {
    const auto r = static_cast<Eigen::Index>(a);
    double kl = 0.0;
    for (Eigen::Index j = 0; j < lp.cols(); ++j) {
      const double p = ctx.p_cal(r, j);
      if (p > 0.0) kl += p * (ctx.log_p_cal(r, j) - lp(r, j));
    }
    out[a] = kl;
  }
  return out;
}

// sum_i w_i sum_j Sg(p_cal_ij) [log Sg(p_cal_ij) - log p_dat_ij]; gradient only via p_dat.
inline Tensor dcm_loss(const AnchorContextSet& ctx) {
  if (ctx.size() == 0) throw std::invalid_argument("dcm_loss: no anchor contexts");
  Mat coeff = ctx.p_cal;
  double neg_entropy = 0.0;
  for (std::size_t a = 0; a < ctx.size(); ++a) {
    const auto r = static_cast<Eigen::Index>(a);
    coeff.row(r) *= ctx.weights[a];
    for (Eigen::Index j = 0; j < coeff.cols(); ++j) {
      const double p = ctx.p_cal(r, j);
      if (p > 0.0) neg_entropy += ctx.weights[a] * p * ctx.log_p_cal(r, j);
    }
  }
  return Tensor::scalar(neg_entropy) - sum(mul(Tensor(std::move(coeff)), ctx.log_p_dat));
}

struct LpmOptions {
  LpmVariant variant = LpmVariant::Shifted;
  double concentration = 0.0;  // Concentrated variant; 0 means K + 1
  double simplex_eps = kSimplexEpsilon;
};

struct LpmStats {
  std::size_t clamp_events = 0;
};

namespace detail {

// Dirichlet parameters from p_pre rows, clamped off zero so every variant has alpha > 0.
inline Mat prior_alpha(const Mat& p_pre, double eps) {
  Mat alpha(p_pre.rows(), p_pre.cols());
  for (Eigen::Index r = 0; r < p_pre.rows(); ++r) {
    const auto clamped = clamp_to_simplex(std::span<const double>(p_pre.row(r).data(), static_cast<std::size_t>(p_pre.cols())), eps);
    for (Eigen::Index j = 0; j < p_pre.cols(); ++j) alpha(r, j) = clamped.beta[static_cast<std::size_t>(j)];
  }
  return alpha;
}

inline double row_log_beta(const Mat& alpha, Eigen::Index r) {
  return log_multivariate_beta(std::span<const double>(alpha.row(r).data(), static_cast<std::size_t>(alpha.cols())));
}

}  // namespace detail

// Dirichlet score of p_dat under p_pre, summed over anchors (to be maximized).
//   shifted:      sum_i log Dir(p_dat_i | p_pre_i + 1)
//   literal:      sum_i Dir(p_dat_i | p_pre_i)
//   concentrated: sum_i log Dir(p_dat_i | c * p_pre_i)
inline Tensor lpm_loss(const AnchorContextSet& ctx, const LpmOptions& opts = {}, LpmStats* stats = nullptr) {
  if (ctx.size() == 0) throw std::invalid_argument("lpm_loss: no anchor contexts");
  const Eigen::Index kdim = ctx.log_p_dat.cols();
  if (kdim < 2) throw DomainError("lpm_loss: Dirichlet needs K >= 2");

  const Tensor p_dat = exp(ctx.log_p_dat);
  if (stats != nullptr) stats->clamp_events += static_cast<std::size_t>((p_dat.value().array() < opts.simplex_eps).count());
  const Tensor clamped = clamp_min(p_dat, opts.simplex_eps);
  const Tensor beta = div(clamped, broadcast_cols(row_sum(clamped), kdim));
  const Vec sums = beta.value().rowwise().sum();
  if (((sums.array() - 1.0).abs() > 1e-9).any()) throw DomainError("lpm_loss: p_dat left the simplex after clamping");
  const Tensor log_beta = log(beta);

  const Mat alpha = detail::prior_alpha(ctx.p_pre, opts.simplex_eps);
  switch (opts.variant) {
    case LpmVariant::Shifted: {
      double log_b = 0.0;
      const Mat shifted = alpha.array() + 1.0;
      for (Eigen::Index r = 0; r < alpha.rows(); ++r) log_b += detail::row_log_beta(shifted, r);
      return sum(mul(Tensor(alpha), log_beta)) - log_b;
    }
    case LpmVariant::Concentrated: {
      const double c = opts.concentration > 0.0 ? opts.concentration : static_cast<double>(kdim + 1);
      const Mat scaled = c * alpha;
      double log_b = 0.0;
      for (Eigen::Index r = 0; r < alpha.rows(); ++r) log_b += detail::row_log_beta(scaled, r);
      return sum(mul(Tensor(Mat(scaled.array() - 1.0)), log_beta)) - log_b;
    }
    case LpmVariant::Literal: {
      Mat log_b(alpha.rows(), 1);
      for (Eigen::Index r = 0; r < alpha.rows(); ++r) log_b(r, 0) = detail::row_log_beta(alpha, r);
      const Tensor log_density = sub(row_sum(mul(Tensor(Mat(alpha.array() - 1.0)), log_beta)), Tensor(std::move(log_b)));
      return sum(exp(log_density));
    }
  }
  throw std::invalid_argument("unknown LPM variant");
}

// ---------------------------------------------------------------------------
// Baseline constraints (a)-(e)

struct BaselineStats {
  bool all_noise = false;
  int n_clusters = 0;
};

// (b): squared gap between each column's sorted values and the midpoint
// quantiles of Uniform(-1, 1), averaged over entries.
inline Tensor uniform_cube_penalty(const Tensor& z) {
  const Mat frozen = stop_gradient(z).value();
  const Eigen::Index m = frozen.rows();
  Mat target(m, frozen.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index c = 0; c < frozen.cols(); ++c) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return frozen(a, c) < frozen(b, c); });
    for (Eigen::Index r = 0; r < m; ++r)
      target(order[static_cast<std::size_t>(r)], c) = -1.0 + (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(m);
  }
  return mean(square(sub(z, Tensor(std::move(target)))));
}

// (c)/(d): mean Gaussian NLL under Sg batch mean and either Sg shrunk batch
// covariance or the identity.
inline Tensor gaussian_nll_penalty(const Tensor& z, bool identity_covariance, double lambda_shrink) {
  const Mat frozen = stop_gradient(z).value();
  const Eigen::Index m = z.rows();
  const Eigen::Index k = z.cols();
  const Eigen::RowVectorXd mu = frozen.colwise().mean();
  const Tensor centered = sub(z, Tensor(Mat(mu.replicate(m, 1))));
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (identity_covariance) {
    return sum(square(centered)) * (0.5 / static_cast<double>(m)) + 0.5 * static_cast<double>(k) * log2pi;
  }
  const CovarianceEstimate cov = estimate_covariance(frozen, lambda_shrink);
  const Tensor w = matmul(centered, Tensor(cov.whitener));
  return sum(square(w)) * (0.5 / static_cast<double>(m)) + 0.5 * (static_cast<double>(k) * log2pi + cov.log_det);
}

// (e): DBSCAN on Sg(z), then per-point NLL under its cluster's isotropic
// Gaussian (Sg moments); noise points contribute zero. Mean over all rows.
inline Tensor gaussian_mixture_penalty(const Tensor& z, double eps, std::size_t min_pts, BaselineStats* stats = nullptr) {
  const Mat frozen = stop_gradient(z).value();
  const Eigen::Index m = z.rows();
  const Eigen::Index k = z.cols();
  const ClusterAssignment assign = dbscan(frozen, eps, min_pts);
  const auto moments = cluster_moments(frozen, assign);
  if (stats != nullptr) {
    stats->n_clusters = assign.n_clusters;
    stats->all_noise = assign.n_clusters == 0;
  }
  if (assign.n_clusters == 0) return Tensor::scalar(0.0);
  Mat centers = frozen;  // noise rows: zero residual
  Mat coeff = Mat::Zero(m, k);
  double constant = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int l = assign.labels[static_cast<std::size_t>(i)];
    if (l < 0) continue;
    const auto& c = moments[static_cast<std::size_t>(l)];
    centers.row(i) = c.mean.transpose();
    coeff.row(i).setConstant(0.5 / c.variance);
    constant += 0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi * c.variance);
  }
  const Tensor resid = sub(z, Tensor(std::move(centers)));
  return (sum(mul(Tensor(std::move(coeff)), square(resid))) + constant) / static_cast<double>(m);
}

inline Tensor constraint_baseline(const Tensor& z, ConstrainingKind kind, const ConstrainingPartSpec& params,
                                  BaselineStats* stats = nullptr) {
  if (z.rows() < 2) throw ShapeError("constraint_baseline needs at least 2 rows");
  switch (kind) {
    case ConstrainingKind::UniformSphere: return uniformity_sphere(z, params.uniformity_t);
    case ConstrainingKind::UniformCube: return uniform_cube_penalty(z);
    case ConstrainingKind::GaussFull: return gaussian_nll_penalty(z, false, params.lambda_shrink);
    case ConstrainingKind::GaussIdentity: return gaussian_nll_penalty(z, true, params.lambda_shrink);
    case ConstrainingKind::GaussMixture: return gaussian_mixture_penalty(z, params.dbscan_eps, params.dbscan_min_pts, stats);
    default: throw std::invalid_argument("constraint_baseline: not a baseline constraint kind");
  }
}

inline bool is_baseline(ConstrainingKind k) {
  return k == ConstrainingKind::UniformSphere || k == ConstrainingKind::UniformCube || k == ConstrainingKind::GaussFull ||
         k == ConstrainingKind::GaussIdentity || k == ConstrainingKind::GaussMixture;
}

// ---------------------------------------------------------------------------
// Composite objective

struct ObjectiveBreakdown {
  Tensor total;
  double l_ctr = 0.0;
  double l_dcm = 0.0;
  double l_lpm = 0.0;
  std::size_t clamp_events = 0;
};

// L = l_ctr + nu * dcm - upsilon * lpm. A zero weight drops its term entirely,
// so nu = upsilon = 0 returns l_ctr unchanged.
inline ObjectiveBreakdown total_objective(const Tensor& l_ctr, const AnchorContextSet& ctx, double nu, double upsilon,
                                          const LpmOptions& lpm = {}) {
  if (!(nu >= 0.0) || !(upsilon >= 0.0)) throw std::invalid_argument("total_objective: nu and upsilon must be >= 0");
  ObjectiveBreakdown out;
  out.total = l_ctr;
  out.l_ctr = l_ctr.item();
  if (nu != 0.0) {
    const Tensor d = dcm_loss(ctx);
    out.l_dcm = d.item();
    out.total = out.total + d * nu;
  }
  if (upsilon != 0.0) {
    LpmStats st;
    const Tensor l = lpm_loss(ctx, lpm, &st);
    out.l_lpm = l.item();
    out.clamp_events = st.clamp_events;
    out.total = out.total - l * upsilon;
  }
  return out;
}

}  // namespace glf
