#pragma once

// Finite-difference verification of every loss on seeded random batches.

#include "glf/autodiff.hpp"
#include "glf/losses.hpp"
#include "glf/models.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace glf {

struct GradCheckCase {
  std::string name;
  // Builds the scalar function and the point at which to check it.
  std::function<std::pair<ScalarFn, Mat>(std::uint64_t seed)> make;
};

struct GradCheckRow {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double tolerance = 1e-4;

  bool passed() const {
    for (const auto& r : rows)
      if (!r.passed) return false;
    return true;
  }
  std::vector<std::string> failing_cases() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (!r.passed && (out.empty() || out.back() != r.name)) out.push_back(r.name);
    return out;
  }
};

namespace gradcheck_detail {

inline Mat gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Two clusters of `per` points each, well separated, for the DBSCAN baseline.
inline Mat two_blobs(Eigen::Index per, Eigen::Index d, std::mt19937_64& rng) {
  Mat m = gaussian(2 * per, d, rng, 0.15);
  for (Eigen::Index i = per; i < 2 * per; ++i) m(i, 0) += 5.0;
  return m;
}

inline std::pair<Tensor, Tensor> views(const Tensor& x) {
  const Eigen::Index m = x.rows() / 2;
  return {slice_rows(x, 0, m), slice_rows(x, m, m)};
}

}  // namespace gradcheck_detail

// The standard suite: 16 configurations covering every loss and LPM variant.
inline std::vector<GradCheckCase> default_gradcheck_cases() {
  using namespace gradcheck_detail;
  std::vector<GradCheckCase> cases;
  constexpr Eigen::Index kM = 3, kD = 4;  // 2m = 6 views in 4-D

  cases.push_back({"info_nce", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     return std::pair<ScalarFn, Mat>{[](const Tensor& x) { auto [a, b] = views(x); return info_nce(a, b, 0.5); },
                                                     gaussian(2 * kM, kD, rng)};
                   }});
  cases.push_back({"align_only", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     return std::pair<ScalarFn, Mat>{[](const Tensor& x) { auto [a, b] = views(x); return align_only(a, b, 0.5); },
                                                     gaussian(2 * kM, kD, rng)};
                   }});
  cases.push_back({"simsiam_align", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     MLPSpec spec{{kD, 8, kD}, Activation::Tanh, FinalActivation::None};
                     auto params = init_mlp(spec, s + 101, "predictor");
                     return std::pair<ScalarFn, Mat>{[spec, params](const Tensor& x) {
                                                       auto [a, b] = views(x);
                                                       return simsiam_align(a, b, [&](const Tensor& z) { return mlp_forward(spec, params, z); });
                                                     },
                                                     gaussian(2 * kM, kD, rng)};
                   }});
  cases.push_back({"barlow_twins", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     return std::pair<ScalarFn, Mat>{[](const Tensor& x) { auto [a, b] = views(x); return barlow_twins(a, b, 5e-3); },
                                                     gaussian(2 * kM, kD, rng)};
                   }});

  auto context_case = [](std::string name, std::function<Tensor(const AnchorContextSet&)> loss) {
    return GradCheckCase{std::move(name), [loss](std::uint64_t s) {
                           std::mt19937_64 rng(s);
                           Mat x = gaussian(2 * kM, kD, rng);
                           Mat prior = gaussian(2 * kM, 5, rng);
                           return std::pair<ScalarFn, Mat>{[loss, prior](const Tensor& z) {
                                                             auto ctx = build_anchor_contexts(z, Tensor(prior), ContextOptions{});
                                                             return loss(ctx);
                                                           },
                                                           x};
                         }};
  };
  cases.push_back(context_case("dcm_loss", [](const AnchorContextSet& c) { return dcm_loss(c); }));
  cases.push_back(context_case("lpm_loss[shifted]", [](const AnchorContextSet& c) { return lpm_loss(c, {LpmVariant::Shifted}); }));
  cases.push_back(context_case("lpm_loss[literal]", [](const AnchorContextSet& c) { return lpm_loss(c, {LpmVariant::Literal}); }));
  cases.push_back(context_case("lpm_loss[concentrated]", [](const AnchorContextSet& c) { return lpm_loss(c, {LpmVariant::Concentrated, 8.0}); }));
  cases.push_back({"dcm_loss[paper-literal t]", [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     Mat x = gaussian(2 * kM, kD, rng);
                     Mat prior = gaussian(2 * kM, 5, rng);
                     return std::pair<ScalarFn, Mat>{[prior](const Tensor& z) {
                                                       ContextOptions o;
                                                       o.t_form = TForm::PaperLiteral;
                                                       return dcm_loss(build_anchor_contexts(z, Tensor(prior), o));
                                                     },
                                                     x};
                   }});

  ConstrainingPartSpec base;
  auto baseline_case = [base](std::string name, ConstrainingKind kind, bool normalize, bool blobs, double eps) {
    return GradCheckCase{std::move(name), [=](std::uint64_t s) {
                           std::mt19937_64 rng(s);
                           Mat x = blobs ? two_blobs(4, kD, rng) : gaussian(2 * kM, kD, rng);
                           ConstrainingPartSpec p = base;
                           p.dbscan_eps = eps;
                           p.dbscan_min_pts = 2;
                           return std::pair<ScalarFn, Mat>{[=](const Tensor& z) {
                                                             return constraint_baseline(normalize ? l2_normalize_rows(z) : z, kind, p);
                                                           },
                                                           x};
                         }};
  };
  cases.push_back(baseline_case("constraint(a) uniform_sphere", ConstrainingKind::UniformSphere, true, false, 0.5));
  cases.push_back(baseline_case("constraint(b) uniform_cube", ConstrainingKind::UniformCube, false, false, 0.5));
  cases.push_back(baseline_case("constraint(c) gauss_full", ConstrainingKind::GaussFull, false, false, 0.5));
  cases.push_back(baseline_case("constraint(d) gauss_identity", ConstrainingKind::GaussIdentity, false, false, 0.5));
  cases.push_back(baseline_case("constraint(e) gauss_mixture", ConstrainingKind::GaussMixture, false, true, 1.5));

  auto objective_case = [](std::string name, LpmVariant variant) {
    return GradCheckCase{std::move(name), [variant](std::uint64_t s) {
                           std::mt19937_64 rng(s);
                           Mat x = gaussian(2 * kM, kD, rng);
                           Mat prior = gaussian(2 * kM, 5, rng);
                           return std::pair<ScalarFn, Mat>{[prior, variant](const Tensor& z) {
                                                             auto [a, b] = views(z);
                                                             auto ctx = build_anchor_contexts(z, Tensor(prior), ContextOptions{});
                                                             return total_objective(info_nce(a, b, 0.5), ctx, 1.0, 1.0, {variant}).total;
                                                           },
                                                           x};
                         }};
  };
  cases.push_back(objective_case("total_objective", LpmVariant::Shifted));
  cases.push_back(objective_case("total_objective[concentrated]", LpmVariant::Concentrated));
  return cases;
}

inline GradCheckReport run_gradcheck(const std::vector<GradCheckCase>& cases, const std::vector<std::uint64_t>& seeds,
                                     double tolerance = 1e-4, double h = 1e-5) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& c : cases) {
    for (auto seed : seeds) {
      GradCheckRow row{c.name, seed, 0.0, false};
      try {
        auto [fn, x] = c.make(seed);
        row.max_rel_error = finite_difference_check(fn, x, h).max_rel_error;
        row.passed = row.max_rel_error < tolerance;
      } catch (const std::exception&) {
        row.max_rel_error = std::numeric_limits<double>::infinity();
        row.passed = false;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

inline void print_gradcheck(std::ostream& os, const GradCheckReport& report) {
  std::vector<std::string> names;
  for (const auto& r : report.rows)
    if (names.empty() || names.back() != r.name) names.push_back(r.name);
  for (const auto& n : names) {
    double worst = 0.0;
    bool ok = true;
    for (const auto& r : report.rows) {
      if (r.name != n) continue;
      worst = std::max(worst, r.max_rel_error);
      ok = ok && r.passed;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-34s max_rel_err=%.3e  %s\n", n.c_str(), worst, ok ? "PASS" : "FAIL");
    os << buf;
  }
}

}  // namespace glf
