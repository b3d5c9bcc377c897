#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdpde/chain.hpp"

namespace mdpde {

// evaluation is clamped this far inside the parameter box before taking
// derivatives; p^(alpha-1) and psi diverge on the boundary
inline constexpr double kInteriorClamp = 1e-9;

using SupportCell = std::pair<int, int>;  // 0-based (row, col)

/// Parametric model of a K x K transition matrix p_ij(theta).
///
/// The support set C lists the cells with p_ij(theta) > 0, stacked row-wise
/// in ascending column order; `jacobian` returns the c x d matrix of
/// dp_ij/dtheta_u over those cells in the same order.
class ParametricFamily {
 public:
  virtual ~ParametricFamily() = default;

  virtual std::string name() const = 0;
  virtual int num_states() const = 0;
  virtual int dim() const = 0;
  virtual const std::vector<SupportCell>& support() const = 0;

  virtual Vector lower_bounds() const { return Vector::Zero(dim()); }
  virtual Vector upper_bounds() const { return Vector::Ones(dim()); }

  virtual Matrix transition(const Vector& theta) const = 0;
  virtual Matrix jacobian(const Vector& theta) const = 0;

  /// Coordinates can be fitted independently, one scalar problem each.
  virtual bool separable() const { return false; }

  /// For separable families: the coordinate governing a given row, or -1.
  virtual int row_coordinate(int /*row*/) const { return -1; }

  /// Stationary law in closed form where the model admits one.
  virtual std::optional<Vector> stationary(const Vector& /*theta*/) const { return std::nullopt; }

  /// Analytic MLE where the model admits one (support-restricted counts).
  virtual std::optional<Vector> closed_form_mle(const TransitionCounts& /*counts*/) const {
    return std::nullopt;
  }

  /// Per-cell d x d matrices d(psi_ij)/d(theta), ordered like support().
  /// Families without an analytic form fall back to central differences.
  virtual std::optional<std::vector<Matrix>> log_hessian(const Vector& /*theta*/) const {
    return std::nullopt;
  }

  // -- convenience -----------------------------------------------------------

  Vector clamp_interior(const Vector& theta) const {
    Vector lo = lower_bounds(), hi = upper_bounds();
    Vector out = theta;
    for (int u = 0; u < dim(); ++u) {
      const double d = kInteriorClamp * std::max(1.0, hi(u) - lo(u));
      out(u) = std::min(std::max(out(u), lo(u) + d), hi(u) - d);
    }
    return out;
  }

  void check_in_box(const Vector& theta) const {
    if (theta.size() != dim()) throw std::invalid_argument(name() + ": theta has wrong dimension");
    Vector lo = lower_bounds(), hi = upper_bounds();
    for (int u = 0; u < dim(); ++u)
      if (theta(u) < lo(u) - 1e-12 || theta(u) > hi(u) + 1e-12)
        throw std::invalid_argument(name() + ": theta outside parameter space");
  }

  /// psi_ij = (dp_ij/dtheta)/p_ij for each support cell, c x d.
  Matrix psi(const Vector& theta) const {
    const Vector th = clamp_interior(theta);
    const Matrix P = transition(th);
    const Matrix J = jacobian(th);
    Matrix out(J.rows(), J.cols());
    const auto& C = support();
    for (std::size_t k = 0; k < C.size(); ++k)
      out.row(static_cast<Eigen::Index>(k)) = J.row(static_cast<Eigen::Index>(k)) / P(C[k].first, C[k].second);
    return out;
  }

  /// d(psi)/d(theta) per cell, analytic when provided, else central
  /// differences with step 1e-5 * max(1, |theta_u|).
  std::vector<Matrix> psi_derivative(const Vector& theta) const {
    if (auto lh = log_hessian(theta)) return *lh;
    const Vector th = clamp_interior(theta);
    const int d = dim();
    const auto& C = support();
    std::vector<Matrix> out(C.size(), Matrix::Zero(d, d));
    for (int u = 0; u < d; ++u) {
      const double h = 1e-5 * std::max(1.0, std::abs(th(u)));
      Vector tp = th, tm = th;
      tp(u) += h;
      tm(u) -= h;
      const Matrix pp = psi(tp), pm = psi(tm);
      for (std::size_t k = 0; k < C.size(); ++k)
        out[k].col(u) = (pp.row(static_cast<Eigen::Index>(k)) - pm.row(static_cast<Eigen::Index>(k))).transpose() / (2.0 * h);
    }
    return out;
  }
};

using FamilyPtr = std::shared_ptr<const ParametricFamily>;

}  // namespace mdpde
