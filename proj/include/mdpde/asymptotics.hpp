#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpde/dpd.hpp"
#include "mdpde/family.hpp"
#include "mdpde/special.hpp"

namespace mdpde {

enum class VarianceMode { ModelSpecific, ModelRobust };

/// Sandwich components of the estimator's asymptotic covariance.
struct AsymptoticReport {
  Matrix lambda;        // c x c, block-diagonal by row
  Vector b_alpha_diag;  // c, diag of B_alpha
  Matrix psi;           // d x d
  Matrix omega;         // d x d
  Matrix sigma;         // d x d, psi^-1 omega psi^-1
  Vector se;            // d, sqrt(sigma_ii / T); empty when T unknown
  VarianceMode mode = VarianceMode::ModelSpecific;
  double psi_condition = 0.0;
  bool near_singular = false;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct InfluenceReport {
  std::vector<int> t;          // contamination map, 0-based states
  Vector if_vector;            // IF at that t
  double sensitivity = 0.0;    // gamma_alpha
  enum class Method { Exhaustive, PerRowExtremes, CoordinateAscent } method = Method::Exhaustive;
};

/// Covariance of sqrt(T)(pihat_C - pi_C): lambda_{ij,kl} =
/// delta_ik (delta_jl pi_ij - pi_ij pi_il) / pi_io, restricted to C.
inline Matrix lambda_matrix(const Matrix& pi, const Vector& pi_init,
                            const std::vector<SupportCell>& C) {
  const Eigen::Index c = static_cast<Eigen::Index>(C.size());
  for (const auto& [i, j] : C) {
    (void)j;
    if (pi_init(i) <= 0.0)
      throw std::invalid_argument("lambda_matrix: unreachable state " + std::to_string(i + 1) +
                                  " has support cells");
  }
  Matrix L = Matrix::Zero(c, c);
  for (Eigen::Index a = 0; a < c; ++a) {
    const auto [i, j] = C[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < c; ++b) {
      const auto [k, l] = C[static_cast<std::size_t>(b)];
      if (i != k) continue;
      const double del = (j == l) ? pi(i, j) : 0.0;
      L(a, b) = (del - pi(i, j) * pi(i, l)) / pi_init(i);
    }
  }
  return L;
}

/// Assembles B_alpha, Lambda, Psi_alpha, Omega_alpha and the sandwich
/// Sigma_alpha at (pi, theta). With pi = P(theta) the Psi correction term
/// vanishes and the report is model-specific; with an empirical pi it is the
/// model-robust estimator. Pass T to populate the per-coordinate standard
/// errors.
inline AsymptoticReport model_matrices(const ParametricFamily& fam, const Vector& theta,
                                       const Matrix& pi, const Vector& pi_init, double alpha,
                                       std::int64_t T = 0) {
  const Vector th = fam.clamp_interior(theta);
  const Matrix P = fam.transition(th);
  const Matrix J = fam.jacobian(th);
  const auto& C = fam.support();
  const int d = fam.dim();
  const Eigen::Index c = static_cast<Eigen::Index>(C.size());

  AsymptoticReport rep;
  rep.mode = ((P - pi).lpNorm<Eigen::Infinity>() < 1e-12) ? VarianceMode::ModelSpecific
                                                          : VarianceMode::ModelRobust;
  // rows with zero weight contribute nothing to the sandwich (each Lambda
  // block enters multiplied by pi_io^2 through B^-1), so they are dropped
  // rather than rejected here; the standalone lambda_matrix stays strict
  rep.lambda = Matrix::Zero(c, c);
  for (Eigen::Index a = 0; a < c; ++a) {
    const auto [i, j] = C[static_cast<std::size_t>(a)];
    if (pi_init(i) <= 0.0) continue;
    for (Eigen::Index b = 0; b < c; ++b) {
      const auto [k, l] = C[static_cast<std::size_t>(b)];
      if (i != k) continue;
      const double del = (j == l) ? pi(i, j) : 0.0;
      rep.lambda(a, b) = (del - pi(i, j) * pi(i, l)) / pi_init(i);
    }
  }
  rep.b_alpha_diag.resize(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    const auto [i, j] = C[static_cast<std::size_t>(k)];
    rep.b_alpha_diag(k) = pi_init(i) > 0.0 ? std::pow(P(i, j), 1.0 - alpha) / pi_init(i) : 0.0;
  }

  // Binv J has rows pi_io * p^(alpha-1) * J
  Matrix BinvJ(c, d);
  for (Eigen::Index k = 0; k < c; ++k) {
    const auto [i, j] = C[static_cast<std::size_t>(k)];
    BinvJ.row(k) = pi_init(i) * std::pow(P(i, j), alpha - 1.0) * J.row(k);
  }
  rep.omega = BinvJ.transpose() * rep.lambda * BinvJ;
  rep.psi = J.transpose() * BinvJ;

  if (rep.mode == VarianceMode::ModelRobust) {
    // correction: sum_C pi_io p^a [a psi psi^T + dpsi/dtheta] (p - pi)
    const Matrix Psi_cells = fam.psi(th);
    const auto dpsi = fam.psi_derivative(th);
    for (Eigen::Index k = 0; k < c; ++k) {
      const auto [i, j] = C[static_cast<std::size_t>(k)];
      const double gap = P(i, j) - pi(i, j);
      if (gap == 0.0) continue;
      const Vector psik = Psi_cells.row(k).transpose();
      rep.psi += pi_init(i) * std::pow(P(i, j), alpha) * gap *
                 (alpha * psik * psik.transpose() + dpsi[static_cast<std::size_t>(k)]);
    }
  }

  Eigen::JacobiSVD<Matrix> svd(rep.psi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues()(d - 1);
  const double smax = svd.singularValues()(0);
  // smax ~ 0 means the weights carry no information at all (e.g. a chain
  // whose stationary law concentrates on parameter-free rows)
  if (smin <= 0.0 || !std::isfinite(smin) || smax < 1e-12 || smin <= 1e-14 * smax)
    throw std::runtime_error("model_matrices: Psi_alpha is singular; the Jacobian rank condition fails");
  rep.psi_condition = smax / smin;
  rep.near_singular = rep.psi_condition > 1e12;

  const Matrix psi_inv = svd.solve(Matrix::Identity(d, d));
  rep.sigma = psi_inv * rep.omega * psi_inv.transpose();
  rep.sigma = 0.5 * (rep.sigma + rep.sigma.transpose());  // enforce exact symmetry

  if (T > 0) {
    rep.se.resize(d);
    for (int u = 0; u < d; ++u) rep.se(u) = std::sqrt(std::max(rep.sigma(u, u), 0.0) / static_cast<double>(T));
  }
  return rep;
}

/// Model-specific report at theta with the model's own stationary weights.
inline AsymptoticReport model_matrices(const ParametricFamily& fam, const Vector& theta,
                                       double alpha, std::int64_t T = 0) {
  const Matrix P = fam.transition(fam.clamp_interior(theta));
  Vector pio;
  if (auto cs = fam.stationary(theta))
    pio = *cs;
  else
    pio = stationary_distribution(P).pi;
  return model_matrices(fam, theta, P, pio, alpha, T);
}

/// Symmetric normal confidence intervals theta_i +/- z_{zeta/2} * se_i.
/// `simultaneous` applies the Bonferroni correction across coordinates.
inline std::vector<ConfidenceInterval> confidence_intervals(const Vector& theta_hat,
                                                            const AsymptoticReport& report,
                                                            double level,
                                                            bool simultaneous = false) {
  if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("confidence_intervals: level in (0,1)");
  if (report.se.size() != theta_hat.size())
    throw std::invalid_argument("confidence_intervals: report has no standard errors (missing T?)");
  double zeta = 1.0 - level;
  if (simultaneous) zeta /= static_cast<double>(theta_hat.size());
  const double z = normal_quantile(1.0 - zeta / 2.0);
  std::vector<ConfidenceInterval> out(static_cast<std::size_t>(theta_hat.size()));
  for (Eigen::Index u = 0; u < theta_hat.size(); ++u)
    out[static_cast<std::size_t>(u)] = {theta_hat(u) - z * report.se(u), theta_hat(u) + z * report.se(u)};
  return out;
}

// ---------------------------------------------------------------------------
// Random-walk example: analytic efficiency of the estimator relative to the
// MLE, from the V1/V2 variance factors.
// ---------------------------------------------------------------------------

inline double example1_v1(double theta, double alpha) {
  const double t = theta, a = alpha;
  return std::pow(1.0 - t, 2.0 * a) + std::pow(t, 2.0 * a) +
         std::pow(2.0, a - 1.0) * std::pow(t, a - 1.0) * std::pow(1.0 - t, a - 1.0) *
             std::pow(1.0 - 2.0 * t, 2);
}

inline double example1_v2(double theta, double alpha) {
  const double t = theta, a = alpha;
  return std::pow(1.0 - t, 4.0 * a) * t * (2.0 - t) + std::pow(t, 4.0 * a) * (1.0 - t * t) +
         2.0 * std::pow(t, 2.0 * a + 1.0) * std::pow(1.0 - t, 2.0 * a + 1.0) +
         std::pow(2.0, a + 1.0) * std::pow(t, a) * std::pow(1.0 - t, 3.0 * a + 1.0) * (1.0 - 2.0 * t) -
         std::pow(2.0, a + 1.0) * std::pow(t, 3.0 * a + 1.0) * std::pow(1.0 - t, a) * (1.0 - 2.0 * t) +
         std::pow(2.0, 2.0 * a - 1.0) * std::pow(t, 2.0 * a - 1.0) * std::pow(1.0 - t, 2.0 * a - 1.0) *
             std::pow(1.0 - 2.0 * t, 2) * (1.0 - 2.0 * t + 2.0 * t * t);
}

/// Asymptotic variance factor V2 / (4 V1^2); the asymptotic variance of the
/// binomial-walk estimator is this divided by the interior stationary mass.
inline double example1_variance_factor(double theta, double alpha) {
  const double v1 = example1_v1(theta, alpha);
  return example1_v2(theta, alpha) / (4.0 * v1 * v1);
}

/// ARE (in percent) of the binomial-walk MDPDE at (theta, alpha) relative to
/// the MLE: the interior-mass prefactor cancels in the ratio.
inline double are_example1(double theta, double alpha) {
  if (theta <= 0.0 || theta >= 1.0) throw std::invalid_argument("are_example1: theta in (0,1)");
  if (alpha < 0.0) throw std::invalid_argument("are_example1: alpha >= 0");
  return 100.0 * example1_variance_factor(theta, 0.0) / example1_variance_factor(theta, alpha);
}

// ---------------------------------------------------------------------------
// Influence analysis
// ---------------------------------------------------------------------------

namespace detail {

// the contamination-independent part of the IF bracket, per row:
// m_i = sum_j psi_ij p_ij^alpha pi_ij  (d-vector each)
inline std::vector<Vector> if_row_means(const ParametricFamily& fam, const Vector& theta,
                                        const Matrix& pi, double alpha) {
  const Vector th = fam.clamp_interior(theta);
  const Matrix P = fam.transition(th);
  const Matrix J = fam.jacobian(th);
  const auto& C = fam.support();
  std::vector<Vector> m(static_cast<std::size_t>(fam.num_states()), Vector::Zero(fam.dim()));
  for (std::size_t k = 0; k < C.size(); ++k) {
    const auto [i, j] = C[k];
    m[static_cast<std::size_t>(i)] +=
        std::pow(P(i, j), alpha - 1.0) * pi(i, j) * J.row(static_cast<Eigen::Index>(k)).transpose();
  }
  return m;
}

// phi_i(t) = psi_{it} p_{it}^alpha
inline Matrix if_phi(const ParametricFamily& fam, const Vector& theta, double alpha) {
  const Vector th = fam.clamp_interior(theta);
  const Matrix P = fam.transition(th);
  const Matrix J = fam.jacobian(th);
  const auto& C = fam.support();
  Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(C.size()), fam.dim());
  for (std::size_t k = 0; k < C.size(); ++k) {
    const auto [i, j] = C[k];
    phi.row(static_cast<Eigen::Index>(k)) = std::pow(P(i, j), alpha - 1.0) * J.row(static_cast<Eigen::Index>(k));
  }
  return phi;
}

}  // namespace detail

/// Influence function of the estimator functional under row contamination
/// toward the map t (0-based states, t[i] in the support of row i):
///   IF(t) = Psi^-1 sum_i pi_io [ psi_{i t_i} p_{i t_i}^alpha
///                                - sum_j psi_ij p_ij^alpha pi_ij ].
/// The sign follows the definitional derivative d/deps F(Pi_eps) at eps = 0.
inline Vector influence_function(const ParametricFamily& fam, const Vector& theta_pi,
                                 const Matrix& pi, const Vector& pi_init, const std::vector<int>& t,
                                 double alpha) {
  const int K = fam.num_states();
  if (static_cast<int>(t.size()) != K)
    throw std::invalid_argument("influence_function: t must have one target per state");
  const auto& C = fam.support();
  const auto rows = detail::support_by_row(fam);
  // locate each (i, t_i) in the support
  std::vector<int> cell(static_cast<std::size_t>(K), -1);
  for (int i = 0; i < K; ++i) {
    for (int k : rows[static_cast<std::size_t>(i)])
      if (C[static_cast<std::size_t>(k)].second == t[static_cast<std::size_t>(i)]) cell[static_cast<std::size_t>(i)] = k;
    if (cell[static_cast<std::size_t>(i)] < 0)
      throw std::invalid_argument("influence_function: t_" + std::to_string(i + 1) +
                                  " lies outside the support of row " + std::to_string(i + 1));
  }
  const auto rep = model_matrices(fam, theta_pi, pi, pi_init, alpha);
  const auto m = detail::if_row_means(fam, theta_pi, pi, alpha);
  const Matrix phi = detail::if_phi(fam, theta_pi, alpha);
  Vector rhs = Vector::Zero(fam.dim());
  for (int i = 0; i < K; ++i)
    rhs += pi_init(i) * (phi.row(cell[static_cast<std::size_t>(i)]).transpose() - m[static_cast<std::size_t>(i)]);
  return rep.psi.fullPivLu().solve(rhs);
}

/// Sensitivity gamma_alpha = sup_t ||IF(t)||_2. Exhaustive over all row-wise
/// support combinations when their product is at most `exhaustive_limit`;
/// for scalar parameters the supremum decomposes exactly over rows, and for
/// d > 1 a coordinate-ascent sweep is used (flagged as such).
inline InfluenceReport sensitivity(const ParametricFamily& fam, const Vector& theta_pi,
                                   const Matrix& pi, const Vector& pi_init, double alpha,
                                   std::size_t exhaustive_limit = 1000000) {
  const int K = fam.num_states();
  const int d = fam.dim();
  const auto& C = fam.support();
  const auto rows = detail::support_by_row(fam);
  const auto rep = model_matrices(fam, theta_pi, pi, pi_init, alpha);
  const auto m = detail::if_row_means(fam, theta_pi, pi, alpha);
  const Matrix phi = detail::if_phi(fam, theta_pi, alpha);
  const Eigen::FullPivLU<Matrix> psi_lu(rep.psi);

  const auto if_of_cells = [&](const std::vector<int>& cells) {
    Vector rhs = Vector::Zero(d);
    for (int i = 0; i < K; ++i)
      rhs += pi_init(i) * (phi.row(cells[static_cast<std::size_t>(i)]).transpose() - m[static_cast<std::size_t>(i)]);
    return Vector(psi_lu.solve(rhs));
  };
  const auto t_of_cells = [&](const std::vector<int>& cells) {
    std::vector<int> t(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) t[static_cast<std::size_t>(i)] = C[static_cast<std::size_t>(cells[static_cast<std::size_t>(i)])].second;
    return t;
  };

  double combos = 1.0;
  for (int i = 0; i < K; ++i) combos *= static_cast<double>(rows[static_cast<std::size_t>(i)].size());

  InfluenceReport out;
  if (combos <= static_cast<double>(exhaustive_limit)) {
    out.method = InfluenceReport::Method::Exhaustive;
    std::vector<std::size_t> pick(static_cast<std::size_t>(K), 0);
    std::vector<int> cells(static_cast<std::size_t>(K));
    for (;;) {
      for (int i = 0; i < K; ++i) cells[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)][pick[static_cast<std::size_t>(i)]];
      const Vector v = if_of_cells(cells);
      const double n = v.norm();
      if (n > out.sensitivity) {
        out.sensitivity = n;
        out.if_vector = v;
        out.t = t_of_cells(cells);
      }
      int carry = 0;
      while (carry < K && ++pick[static_cast<std::size_t>(carry)] == rows[static_cast<std::size_t>(carry)].size())
        pick[static_cast<std::size_t>(carry++)] = 0;
      if (carry == K) break;
    }
  } else if (d == 1) {
    // per-row scalar extremization: pick the min or max bracket term per row,
    // then compare the two global sign patterns
    out.method = InfluenceReport::Method::PerRowExtremes;
    std::vector<int> cells_hi(static_cast<std::size_t>(K)), cells_lo(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
      int khi = rows[static_cast<std::size_t>(i)][0], klo = khi;
      for (int k : rows[static_cast<std::size_t>(i)]) {
        if (phi(k, 0) > phi(khi, 0)) khi = k;
        if (phi(k, 0) < phi(klo, 0)) klo = k;
      }
      cells_hi[static_cast<std::size_t>(i)] = khi;
      cells_lo[static_cast<std::size_t>(i)] = klo;
    }
    for (const auto& cells : {cells_hi, cells_lo}) {
      const Vector v = if_of_cells(cells);
      if (v.norm() > out.sensitivity) {
        out.sensitivity = v.norm();
        out.if_vector = v;
        out.t = t_of_cells(cells);
      }
    }
  } else {
    out.method = InfluenceReport::Method::CoordinateAscent;
    std::vector<int> cells(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) cells[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)][0];
    double cur = if_of_cells(cells).norm();
    for (int sweep = 0; sweep < 16; ++sweep) {
      bool improved = false;
      for (int i = 0; i < K; ++i) {
        for (int k : rows[static_cast<std::size_t>(i)]) {
          const int old = cells[static_cast<std::size_t>(i)];
          if (k == old) continue;
          cells[static_cast<std::size_t>(i)] = k;
          const double n = if_of_cells(cells).norm();
          if (n > cur + 1e-15) {
            cur = n;
            improved = true;
          } else {
            cells[static_cast<std::size_t>(i)] = old;
          }
        }
      }
      if (!improved) break;
    }
    out.sensitivity = cur;
    out.if_vector = if_of_cells(cells);
    out.t = t_of_cells(cells);
  }
  return out;
}

}  // namespace mdpde
