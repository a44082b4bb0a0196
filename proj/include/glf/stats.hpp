#pragma once

// Closed-form statistical kernels: shrinkage covariance, Gaussian and
// Student-t log-densities, batch discretization, Dirichlet density and mean,
// Shannon entropy. Everything is computed in log-space.

#include "glf/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glf {

// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 relative for x > 0.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma requires x > 0");
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double a = c[0];
  const double t = z + 7.5;
  for (int i = 1; i < 9; ++i) a += c[i] / (z + i);
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

// ---------------------------------------------------------------------------
// Covariance

struct CovarianceEstimate {
  Mat sigma;
  double shrinkage = 0.0;
  Mat inverse;
  double log_det = 0.0;
  // Whitening factor W with W W^T = inverse, so (x - y)^T inverse (x - y) = |(x - y) W|^2 for row vectors.
  Mat whitener;
  // Set when the batch had zero total variance and sigma fell back to shrinkage * I.
  bool degenerate = false;

  Eigen::Index dim() const { return sigma.rows(); }

  static CovarianceEstimate from_matrix(Mat sigma, double shrinkage = 0.0) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw ShapeError("covariance must be square and non-empty");
    CovarianceEstimate c;
    c.sigma = std::move(sigma);
    c.shrinkage = shrinkage;
    c.refresh();
    return c;
  }

  void refresh() {
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
    const Mat l = llt.matrixL();
    const auto k = sigma.rows();
    log_det = 2.0 * l.diagonal().array().log().sum();
    Mat l_inv = l.triangularView<Eigen::Lower>().solve(Mat::Identity(k, k));
    whitener = l_inv.transpose();
    inverse = whitener * l_inv;
  }
};

// Unbiased sample covariance plus lambda * (trace / k) * I. A zero-trace batch
// falls back to lambda * I and sets `degenerate`.
inline CovarianceEstimate estimate_covariance(const Mat& batch, double lambda = 1e-3) {
  const auto m = batch.rows();
  const auto k = batch.cols();
  if (m < 2) throw ShapeError("estimate_covariance needs at least 2 rows");
  if (!(lambda > 0.0)) throw DomainError("shrinkage must be positive");
  const Eigen::RowVectorXd mu = batch.colwise().mean();
  const Mat centered = batch.rowwise() - mu;
  Mat s = (centered.transpose() * centered) / static_cast<double>(m - 1);
  s = 0.5 * (s + s.transpose());
  const double tr = s.trace();
  CovarianceEstimate c;
  c.shrinkage = lambda;
  if (tr <= 0.0) {
    c.sigma = lambda * Mat::Identity(k, k);
    c.degenerate = true;
  } else {
    c.sigma = s + (lambda * tr / static_cast<double>(k)) * Mat::Identity(k, k);
  }
  c.refresh();
  return c;
}

// Sigma' = rho Sigma / (rho - 2), the Student-t scale matching covariance Sigma.
inline CovarianceEstimate scale_covariance(const CovarianceEstimate& cov, double rho) {
  if (!(rho > 2.0)) throw DomainError("degrees of freedom must exceed 2");
  const double f = rho / (rho - 2.0);
  CovarianceEstimate out = cov;
  out.sigma = f * cov.sigma;
  out.inverse = cov.inverse / f;
  out.whitener = cov.whitener / std::sqrt(f);
  out.log_det = cov.log_det + static_cast<double>(cov.dim()) * std::log(f);
  return out;
}

inline double mahalanobis_sq(const Vec& z, const Vec& mean, const CovarianceEstimate& cov) {
  if (z.size() != mean.size() || z.size() != cov.dim())
    throw ShapeError("dimension mismatch: z=" + std::to_string(z.size()) + " mean=" + std::to_string(mean.size()) +
                     " cov=" + std::to_string(cov.dim()));
  const Vec d = z - mean;
  return d.dot(cov.inverse * d);
}

inline double gaussian_log_normalizer(const CovarianceEstimate& cov) {
  return -0.5 * (static_cast<double>(cov.dim()) * std::log(2.0 * std::numbers::pi) + cov.log_det);
}

inline double gaussian_logpdf(const Vec& z, const Vec& mean, const CovarianceEstimate& cov) {
  return gaussian_log_normalizer(cov) - 0.5 * mahalanobis_sq(z, mean, cov);
}

// Standard multivariate t, or the variant with the bracket 1 + d^2 (no 1/rho)
// and normalizer Gamma(rho/2) rho^(rho/2) pi^(rho/2) sqrt(det).
enum class TForm { Standard, PaperLiteral };

inline double student_t_log_normalizer(const CovarianceEstimate& cov_prime, double rho, TForm form = TForm::Standard) {
  if (!(rho > 2.0)) throw DomainError("degrees of freedom must exceed 2");
  const double k = static_cast<double>(cov_prime.dim());
  const double head = log_gamma(0.5 * (rho + k)) - log_gamma(0.5 * rho) - 0.5 * cov_prime.log_det;
  if (form == TForm::Standard) return head - 0.5 * k * std::log(rho * std::numbers::pi);
  return head - 0.5 * rho * std::log(rho) - 0.5 * rho * std::log(std::numbers::pi);
}

// log(1 + d2 / rho) scaled by -(rho + k)/2; the radial part of the t log-density.
inline double student_t_log_kernel(double d2, double rho, Eigen::Index k, TForm form = TForm::Standard) {
  const double u = form == TForm::Standard ? d2 / rho : d2;
  return -0.5 * (rho + static_cast<double>(k)) * std::log1p(u);
}

inline double student_t_logpdf(const Vec& z, const Vec& mean, const CovarianceEstimate& cov_prime, double rho,
                               TForm form = TForm::Standard) {
  const double d2 = mahalanobis_sq(z, mean, cov_prime);
  return student_t_log_normalizer(cov_prime, rho, form) + student_t_log_kernel(d2, rho, cov_prime.dim(), form);
}

// ---------------------------------------------------------------------------
// Batch distributions

enum class DistributionSource { Calibration, Data, Prior };

struct BatchDistribution {
  std::size_t anchor_index = 0;
  std::vector<double> probs;
  DistributionSource source = DistributionSource::Calibration;

  double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }
};

// Max-shifted softmax of log-densities over the non-anchor members.
inline BatchDistribution discretize_over_batch(std::span<const double> log_densities, std::size_t anchor_index = 0,
                                               DistributionSource source = DistributionSource::Calibration) {
  if (log_densities.empty()) throw ShapeError("discretize_over_batch: empty input");
  for (double l : log_densities)
    if (!std::isfinite(l)) throw NumericError("discretize_over_batch: non-finite log-density");
  const double m = *std::max_element(log_densities.begin(), log_densities.end());
  double s = 0.0;
  for (double l : log_densities) s += std::exp(l - m);
  const double lse = m + std::log(s);
  BatchDistribution out{anchor_index, {}, source};
  out.probs.reserve(log_densities.size());
  for (double l : log_densities) out.probs.push_back(std::exp(l - lse));
  return out;
}

// Tape-aware variant: row-wise softmax of a (rows x K) tensor of log-densities.
inline Tensor log_discretize_rows(const Tensor& log_densities) { return log_softmax_rows(log_densities); }

// ---------------------------------------------------------------------------
// Dirichlet

inline void require_positive_alpha(std::span<const double> alpha) {
  if (alpha.size() < 2) throw DomainError("Dirichlet needs K >= 2");
  for (double a : alpha)
    if (!(a > 0.0)) throw DomainError("Dirichlet parameters must be positive");
}

inline double log_multivariate_beta(std::span<const double> alpha) {
  require_positive_alpha(alpha);
  double s = 0.0, lg = 0.0;
  for (double a : alpha) {
    s += a;
    lg += log_gamma(a);
  }
  return lg - log_gamma(s);
}

inline constexpr double kSimplexEpsilon = 1e-8;

struct SimplexProjection {
  std::vector<double> beta;
  // Entries that were below the floor before clamping.
  std::size_t clamped = 0;
};

// Clamp entries to >= eps and renormalize onto the simplex.
inline SimplexProjection clamp_to_simplex(std::span<const double> beta, double eps = kSimplexEpsilon) {
  SimplexProjection p;
  p.beta.assign(beta.begin(), beta.end());
  for (double& b : p.beta) {
    if (b < eps) {
      b = eps;
      ++p.clamped;
    }
  }
  const double s = std::accumulate(p.beta.begin(), p.beta.end(), 0.0);
  for (double& b : p.beta) b /= s;
  return p;
}

// sum_j (alpha_j - 1) log beta_j - log B(alpha). beta must be strictly inside
// the simplex (entries >= eps, sum within 1e-9 of 1).
inline double dirichlet_logpdf(std::span<const double> beta, std::span<const double> alpha) {
  require_positive_alpha(alpha);
  if (beta.size() != alpha.size()) throw ShapeError("dirichlet_logpdf: beta and alpha differ in length");
  double s = 0.0;
  for (double b : beta) {
    if (!(b >= kSimplexEpsilon) || b > 1.0) throw DomainError("dirichlet_logpdf: beta is on or outside the simplex boundary");
    s += b;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DomainError("dirichlet_logpdf: beta does not sum to 1");
  double acc = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j) acc += (alpha[j] - 1.0) * std::log(beta[j]);
  return acc - log_multivariate_beta(alpha);
}

inline std::vector<double> dirichlet_expectation(std::span<const double> alpha) {
  require_positive_alpha(alpha);
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> out;
  out.reserve(alpha.size());
  for (double a : alpha) out.push_back(a / s);
  return out;
}

// ---------------------------------------------------------------------------
// Entropy

inline double shannon_entropy(std::span<const double> p) {
  double s = 0.0, h = 0.0;
  for (double x : p) {
    if (x < 0.0) throw DomainError("shannon_entropy: negative probability");
    if (x > 1.0 + 1e-12) throw DomainError("shannon_entropy: probability above 1");
    s += x;
    if (x > 0.0) h -= x * std::log(x);
  }
  if (std::abs(s - 1.0) > 1e-9) throw DomainError("shannon_entropy: probabilities do not sum to 1");
  return h;
}

inline double shannon_entropy(const BatchDistribution& p) { return shannon_entropy(p.probs); }

}  // namespace glf
