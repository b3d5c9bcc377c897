#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mdpde/family.hpp"

namespace mdpde {

/// Empirical mass observed on cells outside the model support C. The
/// objective sums over C only, so such mass can either abort the fit (the
/// KLD at alpha = 0 is infinite off-support) or be dropped with a tally.
enum class OffSupportPolicy { Error, Drop };

struct DpdConfig {
  double alpha = 0.5;
  double tol_grad = 1e-8;   // estimating-equation residual tolerance
  double tol_step = 1e-10;  // parameter step tolerance
  int max_iter = 200;
  int multistart = 9;       // grid starts per coordinate
  OffSupportPolicy off_support = OffSupportPolicy::Error;
};

struct DpdEstimate {
  Vector theta_hat;
  double alpha = 0.0;
  double objective_value = 0.0;
  double residual_norm = 0.0;  // ||U||_inf at theta_hat
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_boundary;
  std::size_t off_support_cells = 0;
};

class DataOutsideSupportError : public std::runtime_error {
 public:
  explicit DataOutsideSupportError(const std::string& what) : std::runtime_error(what) {}
};

/// Density power divergence between probability vectors g (data) and f
/// (model): sum f^(1+a) - (1+1/a) f^a g + (1/a) g^(1+a) for a > 0, and the
/// Kullback-Leibler divergence sum g log(g/f) at a = 0.
inline double dpd_divergence(const Vector& g, const Vector& f, double alpha) {
  if (g.size() != f.size()) throw std::invalid_argument("dpd_divergence: length mismatch");
  if (alpha < 0.0) throw std::invalid_argument("dpd_divergence: alpha must be >= 0");
  if ((g.array() < -1e-12).any() || (f.array() < -1e-12).any())
    throw std::invalid_argument("dpd_divergence: negative entries");
  if (std::abs(g.sum() - 1.0) > 1e-10 || std::abs(f.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("dpd_divergence: inputs must sum to 1");
  if (alpha == 0.0) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      if (g(j) <= 0.0) continue;  // 0 log 0 := 0
      if (f(j) <= 0.0) throw std::invalid_argument("dpd_divergence: KLD undefined (f=0 < g)");
      kl += g(j) * std::log(g(j) / f(j));
    }
    return std::max(kl, 0.0);
  }
  double s = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j)
    s += std::pow(f(j), 1.0 + alpha) - (1.0 + 1.0 / alpha) * std::pow(f(j), alpha) * g(j) +
         (1.0 / alpha) * std::pow(g(j), 1.0 + alpha);
  return std::max(s, 0.0);
}

namespace detail {

inline std::vector<std::vector<int>> support_by_row(const ParametricFamily& fam) {
  std::vector<std::vector<int>> rows(fam.num_states());
  const auto& C = fam.support();
  for (std::size_t k = 0; k < C.size(); ++k) rows[C[k].first].push_back(static_cast<int>(k));
  return rows;
}

inline std::size_t count_off_support(const ParametricFamily& fam, const EmpiricalTransition& emp) {
  const int K = fam.num_states();
  std::vector<std::vector<bool>> on(K, std::vector<bool>(K, false));
  for (const auto& [i, j] : fam.support()) on[i][j] = true;
  std::size_t n = 0;
  for (int i = 0; i < K; ++i) {
    if (!emp.visited[i]) continue;
    for (int j = 0; j < K; ++j)
      if (!on[i][j] && emp.pi_hat(i, j) > 0.0) ++n;
  }
  return n;
}

}  // namespace detail

/// H_{T,alpha}(theta): the weighted sum over visited rows of the
/// theta-dependent part of the row-wise DPD, (1+a)^-1 sum_i w_i sum_{(i,j) in C}
/// { p^(1+a) - (1+1/a) p^a pihat }; the alpha = 0 branch is the weighted
/// negative log-likelihood over C.
inline double objective(const ParametricFamily& fam, const EmpiricalTransition& emp,
                        const Vector& theta, double alpha,
                        OffSupportPolicy policy = OffSupportPolicy::Error,
                        std::size_t* off_support_cells = nullptr) {
  fam.check_in_box(theta);
  if (emp.num_states() != fam.num_states())
    throw std::invalid_argument("objective: empirical matrix and family disagree on K");
  const std::size_t off = detail::count_off_support(fam, emp);
  if (off_support_cells) *off_support_cells = off;
  if (off > 0 && alpha == 0.0 && policy == OffSupportPolicy::Error)
    throw DataOutsideSupportError("data outside model support (" + std::to_string(off) +
                                  " cells with empirical mass off C at alpha=0)");

  const Matrix P = fam.transition(theta);
  const auto& C = fam.support();
  double H = 0.0;
  for (std::size_t k = 0; k < C.size(); ++k) {
    const auto [i, j] = C[k];
    const double w = emp.pi_init_hat(i);
    if (!emp.visited[i] || w <= 0.0) continue;
    const double p = P(i, j);
    const double g = emp.pi_hat(i, j);
    if (alpha == 0.0) {
      if (g > 0.0) H -= w * g * std::log(std::max(p, 1e-300));
    } else {
      H += w * (std::pow(p, 1.0 + alpha) - (1.0 + 1.0 / alpha) * std::pow(p, alpha) * g) /
           (1.0 + alpha);
    }
  }
  return H;
}

/// U_{T,alpha}(theta) = sum_i w_i sum_{(i,j) in C} psi_ij (p_ij - pihat_ij) p_ij^alpha.
/// Coincides with the gradient of the objective and, at alpha = 0, with the
/// score equation of the MLE.
inline Vector estimating_function(const ParametricFamily& fam, const EmpiricalTransition& emp,
                                  const Vector& theta, double alpha) {
  fam.check_in_box(theta);
  const Vector th = fam.clamp_interior(theta);
  const Matrix P = fam.transition(th);
  const Matrix J = fam.jacobian(th);
  const auto& C = fam.support();
  Vector U = Vector::Zero(fam.dim());
  for (std::size_t k = 0; k < C.size(); ++k) {
    const auto [i, j] = C[k];
    const double w = emp.pi_init_hat(i);
    if (!emp.visited[i] || w <= 0.0) continue;
    const double p = P(i, j);
    // psi p^a = J p^(a-1)
    U += w * std::pow(p, alpha - 1.0) * (p - emp.pi_hat(i, j)) * J.row(static_cast<Eigen::Index>(k)).transpose();
  }
  return U;
}

namespace detail {

struct ScalarFit {
  double x = 0.0;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool at_boundary = false;
  bool step_converged = false;
};

// Grid scan over the local minima cells, golden-section refinement in each,
// then a damped Newton polish on the scalar derivative. `f` is the objective
// along the coordinate, `deriv` its derivative (the estimating function).
inline ScalarFit minimize_scalar(const std::function<double(double)>& f,
                                 const std::function<double(double)>& deriv, double lo, double hi,
                                 const DpdConfig& cfg) {
  const double span = hi - lo;
  const double pad = kInteriorClamp * std::max(1.0, span);
  const int m = std::max(cfg.multistart, 3);
  std::vector<double> xs(static_cast<std::size_t>(m) + 2);
  xs.front() = lo + pad;
  xs.back() = hi - pad;
  for (int g = 0; g < m; ++g)
    xs[static_cast<std::size_t>(g) + 1] = lo + (g + 0.5) * span / m;
  std::vector<double> vs(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) vs[k] = f(xs[k]);

  ScalarFit best;
  int iters = 0;
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const bool local_min = (k == 0 || vs[k] <= vs[k - 1]) && (k + 1 == xs.size() || vs[k] <= vs[k + 1]);
    if (!local_min) continue;
    double a = k == 0 ? lo + pad : xs[k - 1];
    double b = k + 1 == xs.size() ? hi - pad : xs[k + 1];
    // golden section
    double x1 = a + golden * (b - a), x2 = b - golden * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > 1e-3 * span && iters < 200) {
      if (f1 < f2) {
        b = x2; x2 = x1; f2 = f1;
        x1 = a + golden * (b - a); f1 = f(x1);
      } else {
        a = x1; x1 = x2; f1 = f2;
        x2 = b - golden * (b - a); f2 = f(x2);
      }
      ++iters;
    }
    double x = f1 < f2 ? x1 : x2;
    // Newton polish on the derivative root; the two extra iterations past
    // tolerance push interior roots to machine precision
    double u = deriv(x);
    bool step_conv = false;
    int extra = 2;
    for (int it = 0; it < 40 && (std::abs(u) > cfg.tol_grad || extra-- > 0); ++it) {
      const double h = 1e-6 * std::max(1.0, std::abs(x));
      const double du = (deriv(std::min(x + h, hi - pad)) - deriv(std::max(x - h, lo + pad))) / (2.0 * h);
      if (!(std::abs(du) > 0.0) || !std::isfinite(du)) break;
      double step = -u / du;
      double nx = std::min(std::max(x + step, lo + pad), hi - pad);
      double nu = deriv(nx);
      int halv = 0;
      while (std::abs(nu) > std::abs(u) && halv < 25) {
        step *= 0.5;
        nx = std::min(std::max(x + step, lo + pad), hi - pad);
        nu = deriv(nx);
        ++halv;
      }
      ++iters;
      if (std::abs(nx - x) <= cfg.tol_step * std::max(1.0, span)) {
        x = nx;
        u = nu;
        step_conv = true;
        break;
      }
      x = nx;
      u = nu;
    }
    const double fx = f(x);
    if (fx < best.value - 1e-14 || (std::abs(fx - best.value) <= 1e-14 && x < best.x)) {
      best.x = x;
      best.value = fx;
      best.at_boundary = (x <= lo + 2.0 * pad) || (x >= hi - 2.0 * pad);
      best.step_converged = step_conv || std::abs(u) <= cfg.tol_grad;
    }
  }
  best.iterations = iters;
  return best;
}

}  // namespace detail

/// The MDPDE: global minimizer of the objective over the parameter box.
/// Separable families are fitted one coordinate at a time; otherwise a
/// multistart grid feeds a damped projected Newton iteration on U.
inline DpdEstimate estimate(const ParametricFamily& fam, const EmpiricalTransition& emp,
                            const DpdConfig& cfg) {
  if (cfg.alpha < 0.0) throw std::invalid_argument("estimate: alpha must be >= 0");
  // at least one visited row must intersect the support
  {
    bool any = false;
    for (const auto& [i, j] : fam.support())
      if (emp.visited[i] && emp.pi_hat(i, j) > 0.0) { any = true; break; }
    if (!any) throw std::invalid_argument("estimate: no visited rows intersect the model support");
  }
  std::size_t off_cells = 0;
  objective(fam, emp, fam.clamp_interior(Vector::Constant(fam.dim(), 0.5)), cfg.alpha,
            cfg.off_support, &off_cells);  // validates the off-support policy up front

  const int d = fam.dim();
  const Vector lo = fam.lower_bounds(), hi = fam.upper_bounds();
  DpdEstimate out;
  out.alpha = cfg.alpha;
  out.at_boundary.assign(static_cast<std::size_t>(d), false);
  out.off_support_cells = off_cells;

  const auto H = [&](const Vector& th) {
    return objective(fam, emp, th, cfg.alpha, OffSupportPolicy::Drop, nullptr);
  };

  bool solver_converged = true;
  if (fam.separable() || d == 1) {
    Vector theta = fam.clamp_interior(0.5 * (lo + hi));
    int total_iters = 0;
    for (int u = 0; u < d; ++u) {
      Vector work = theta;
      const auto fu = [&](double x) { work(u) = x; return H(work); };
      const auto du = [&](double x) {
        work(u) = x;
        return estimating_function(fam, emp, work, cfg.alpha)(u);
      };
      const auto fit = detail::minimize_scalar(fu, du, lo(u), hi(u), cfg);
      theta(u) = fit.x;
      out.at_boundary[static_cast<std::size_t>(u)] = fit.at_boundary;
      solver_converged = solver_converged && (fit.step_converged || fit.at_boundary);
      total_iters += fit.iterations;
    }
    out.theta_hat = theta;
    out.iterations = total_iters;
  } else {
    // multistart grid, capped so the start count stays manageable
    int per_dim = cfg.multistart;
    while (std::pow(per_dim, d) > 256.0 && per_dim > 2) --per_dim;
    std::vector<Vector> starts;
    std::vector<int> digits(static_cast<std::size_t>(d), 0);
    for (;;) {
      Vector s(d);
      for (int u = 0; u < d; ++u)
        s(u) = lo(u) + (digits[static_cast<std::size_t>(u)] + 0.5) * (hi(u) - lo(u)) / per_dim;
      starts.push_back(s);
      int carry = 0;
      while (carry < d && ++digits[static_cast<std::size_t>(carry)] == per_dim)
        digits[static_cast<std::size_t>(carry++)] = 0;
      if (carry == d) break;
    }

    double best_obj = std::numeric_limits<double>::infinity();
    Vector best_theta;
    int best_iters = 0;
    bool best_conv = false;
    for (const Vector& s0 : starts) {
      Vector th = s0;
      int iters = 0;
      bool conv = false;
      for (; iters < cfg.max_iter; ++iters) {
        const Vector U = estimating_function(fam, emp, th, cfg.alpha);
        if (U.lpNorm<Eigen::Infinity>() <= cfg.tol_grad) { conv = true; break; }
        Matrix Jac(d, d);
        for (int u = 0; u < d; ++u) {
          const double h = 1e-6 * std::max(1.0, std::abs(th(u)));
          Vector tp = th, tm = th;
          tp(u) = std::min(tp(u) + h, hi(u));
          tm(u) = std::max(tm(u) - h, lo(u));
          Jac.col(u) = (estimating_function(fam, emp, tp, cfg.alpha) -
                        estimating_function(fam, emp, tm, cfg.alpha)) /
                       (tp(u) - tm(u));
        }
        Vector step = Jac.fullPivLu().isInvertible() ? Vector(-Jac.fullPivLu().solve(U)) : Vector(-U);
        // backtrack on the objective; U is its gradient
        const double H0 = H(th);
        double lambda = 1.0;
        Vector cand;
        for (int bt = 0; bt < 30; ++bt) {
          cand = fam.clamp_interior(th + lambda * step);
          if (H(cand) <= H0 + 1e-4 * lambda * U.dot(step) || U.dot(step) >= 0.0) break;
          lambda *= 0.5;
        }
        const double moved = (cand - th).lpNorm<Eigen::Infinity>();
        th = cand;
        if (moved <= cfg.tol_step) { conv = true; break; }
      }
      const double obj = H(th);
      const bool better =
          obj < best_obj - 1e-14 ||
          (std::abs(obj - best_obj) <= 1e-14 &&
           (best_theta.size() == 0 || std::lexicographical_compare(th.data(), th.data() + d,
                                                                   best_theta.data(), best_theta.data() + d)));
      if (better) {
        best_obj = obj;
        best_theta = th;
        best_iters = iters;
        best_conv = conv;
      }
    }
    out.theta_hat = best_theta;
    out.iterations = best_iters;
    solver_converged = best_conv;
    for (int u = 0; u < d; ++u) {
      const double pad = 2.0 * kInteriorClamp * std::max(1.0, hi(u) - lo(u));
      out.at_boundary[static_cast<std::size_t>(u)] =
          best_theta(u) <= lo(u) + pad || best_theta(u) >= hi(u) - pad;
    }
  }

  out.objective_value = H(out.theta_hat);
  out.residual_norm =
      estimating_function(fam, emp, out.theta_hat, cfg.alpha).lpNorm<Eigen::Infinity>();
  bool boundary_bound = false;
  for (bool b : out.at_boundary) boundary_bound = boundary_bound || b;
  out.converged = out.residual_norm <= cfg.tol_grad || boundary_bound || solver_converged;
  return out;
}

/// Scalar fit of a single separable coordinate against one observed row
/// distribution; e.g. the clubbed credit rows, where only per-row rates exist.
inline double estimate_per_row(const ParametricFamily& fam, const Vector& observed_row,
                               int row_index, double alpha, const DpdConfig& cfg = {}) {
  if (!fam.separable()) throw std::invalid_argument("estimate_per_row: family is not separable");
  if (std::abs(observed_row.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("estimate_per_row: observed row must sum to 1");
  const int u = fam.row_coordinate(row_index);
  if (u < 0) throw std::invalid_argument("estimate_per_row: row has no free coordinate");
  const Vector lo = fam.lower_bounds(), hi = fam.upper_bounds();

  Vector theta = fam.clamp_interior(0.5 * (lo + hi));
  const auto model_row = [&](double x) {
    theta(u) = x;
    return Vector(fam.transition(theta).row(row_index).transpose());
  };
  const auto f = [&](double x) {
    const Vector p = model_row(x);
    double v = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double g = observed_row(j);
      if (alpha == 0.0) {
        if (g > 0.0) v -= g * std::log(std::max(p(j), 1e-300));
      } else {
        v += (std::pow(p(j), 1.0 + alpha) - (1.0 + 1.0 / alpha) * std::pow(p(j), alpha) * g) /
             (1.0 + alpha);
      }
    }
    return v;
  };
  const auto df = [&](double x) {
    const double h = 1e-7;
    return (f(x + h) - f(x - h)) / (2.0 * h);
  };
  return detail::minimize_scalar(f, df, lo(u), hi(u), cfg).x;
}

}  // namespace mdpde
