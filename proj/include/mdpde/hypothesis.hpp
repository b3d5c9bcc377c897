#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mdpde/asymptotics.hpp"
#include "mdpde/dpd.hpp"
#include "mdpde/families.hpp"
#include "mdpde/special.hpp"

namespace mdpde {

/// Composite null h(theta) = 0_r with derivative matrix H(theta) = dh/dtheta
/// (d x r). When no analytic H is supplied it is formed by central
/// differences with step 1e-6 * max(1, |theta_u|).
struct Constraint {
  int r = 0;
  std::function<Vector(const Vector&)> h;
  std::function<Matrix(const Vector&)> H;  // optional; d x r

  Matrix derivative(const Vector& theta) const {
    if (H) return H(theta);
    const int d = static_cast<int>(theta.size());
    Matrix out(d, r);
    for (int u = 0; u < d; ++u) {
      const double step = 1e-6 * std::max(1.0, std::abs(theta(u)));
      Vector tp = theta, tm = theta;
      tp(u) += step;
      tm(u) -= step;
      out.row(u) = ((h(tp) - h(tm)) / (2.0 * step)).transpose();
    }
    return out;
  }
};

/// h(theta) = theta - theta0 (simple hypothesis; r = d).
inline Constraint simple_constraint(const Vector& theta0) {
  Constraint c;
  c.r = static_cast<int>(theta0.size());
  c.h = [theta0](const Vector& th) { return Vector(th - theta0); };
  c.H = [d = c.r](const Vector&) { return Matrix(Matrix::Identity(d, d)); };
  return c;
}

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double alpha_tuning = 0.0;
  std::map<double, bool> reject_at;  // level -> decision
  std::optional<double> noncentrality;
};

namespace detail {

inline WaldResult finish_wald(double stat, int df, double alpha,
                              std::initializer_list<double> levels = {0.10, 0.05, 0.01}) {
  WaldResult res;
  res.statistic = stat;
  res.df = df;
  res.alpha_tuning = alpha;
  res.p_value = 1.0 - chi2_cdf(stat, df);
  for (double lv : levels) res.reject_at[lv] = stat > chi2_quantile(1.0 - lv, df);
  return res;
}

}  // namespace detail

/// W = T h(th)^t [H^t Sigma H]^-1 h(th), asymptotically chi^2_r under the
/// null. The report should be the model-specific one at theta_hat; pass a
/// drift d to also compute the contiguous-alternative noncentrality
/// delta = d^t H (H^t Sigma H)^-1 H^t d.
inline WaldResult wald_composite(const DpdEstimate& est, const AsymptoticReport& report,
                                 const Constraint& constraint, std::int64_t T,
                                 const std::optional<Vector>& drift = std::nullopt) {
  if (constraint.r > est.theta_hat.size())
    throw std::invalid_argument("wald_composite: more restrictions than parameters");
  const Vector hv = constraint.h(est.theta_hat);
  if (hv.size() != constraint.r) throw std::invalid_argument("wald_composite: h has wrong length");
  const Matrix Hm = constraint.derivative(est.theta_hat);
  const Matrix sigma_star = Hm.transpose() * report.sigma * Hm;  // r x r
  Eigen::FullPivLU<Matrix> lu(sigma_star);
  if (!lu.isInvertible())
    throw std::runtime_error("wald_composite: H^t Sigma H is singular");
  const double stat = static_cast<double>(T) * hv.dot(lu.solve(hv));
  WaldResult res = detail::finish_wald(std::max(stat, 0.0), constraint.r, est.alpha);
  if (drift) {
    const Vector Hd = Hm.transpose() * (*drift);
    res.noncentrality = Hd.dot(lu.solve(Hd));
  }
  return res;
}

/// Per-coordinate Wald statistic for the Bernoulli-Laplace null
/// theta_i = (K-i)/(K-1) within the state-dependent walk family:
/// W = T sum_i (th_i - th_i0)^2 / sigma_alpha^(i)(theta_0), df = K-2.
/// The sigma^(i) are the diagonal of the sandwich at the null.
inline WaldResult wald_bernoulli_laplace(const Vector& theta_hat, std::int64_t T, int K,
                                         double alpha) {
  if (theta_hat.size() != K - 2)
    throw std::invalid_argument("wald_bernoulli_laplace: expected K-2 coordinates");
  const MultiBinomialWalk fam(K);
  const Vector theta0 = bernoulli_laplace_theta(K);
  const AsymptoticReport rep = model_matrices(fam, theta0, alpha);
  double stat = 0.0;
  for (int u = 0; u < K - 2; ++u) {
    const double gap = theta_hat(u) - theta0(u);
    stat += static_cast<double>(T) * gap * gap / rep.sigma(u, u);
  }
  return detail::finish_wald(stat, K - 2, alpha);
}

/// Two-sample similarity test:
/// W = T1 T2 (th1 - th2)^t [T2 Sigma(1) + T1 Sigma(2)]^-1 (th1 - th2),
/// asymptotically chi^2_d under theta_1 = theta_2. Symmetric in the samples.
inline WaldResult two_sample(const DpdEstimate& est1, const DpdEstimate& est2,
                             const AsymptoticReport& rep1, const AsymptoticReport& rep2,
                             std::int64_t T1, std::int64_t T2) {
  if (est1.theta_hat.size() != est2.theta_hat.size())
    throw std::invalid_argument("two_sample: estimates have different dimension");
  if (est1.alpha != est2.alpha)
    throw std::invalid_argument("two_sample: estimates use different alpha");
  if (T1 < 1 || T2 < 1) throw std::invalid_argument("two_sample: sample sizes must be >= 1");
  const Vector diff = est1.theta_hat - est2.theta_hat;
  const Matrix M = static_cast<double>(T2) * rep1.sigma + static_cast<double>(T1) * rep2.sigma;
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw std::runtime_error("two_sample: combined covariance is singular");
  const double stat =
      static_cast<double>(T1) * static_cast<double>(T2) * diff.dot(lu.solve(diff));
  return detail::finish_wald(std::max(stat, 0.0), static_cast<int>(est1.theta_hat.size()),
                             est1.alpha);
}

/// Second-order influence function of the Wald test functional at a null
/// point: IF2 = 2 IF^t H Sigma*^-1 H^t IF (the first-order IF vanishes).
inline double test_if2(const Constraint& constraint, const Vector& theta0, const Vector& if_vector,
                       const Matrix& sigma) {
  const Vector h0 = constraint.h(theta0);
  if (h0.lpNorm<Eigen::Infinity>() > 1e-8)
    throw std::invalid_argument("test_if2: theta0 does not satisfy the null");
  const Matrix Hm = constraint.derivative(theta0);
  const Matrix sigma_star = Hm.transpose() * sigma * Hm;
  const Vector v = Hm.transpose() * if_vector;
  return 2.0 * v.dot(sigma_star.fullPivLu().solve(v));
}

}  // namespace mdpde
