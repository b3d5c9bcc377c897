#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "mdpde/family.hpp"

namespace mdpde {

namespace detail {

inline std::vector<SupportCell> walk_support(int K, bool with_diagonal) {
  std::vector<SupportCell> C;
  C.emplace_back(0, 1);
  for (int i = 1; i + 1 < K; ++i) {
    C.emplace_back(i, i - 1);
    if (with_diagonal) C.emplace_back(i, i);
    C.emplace_back(i, i + 1);
  }
  C.emplace_back(K - 1, K - 2);
  return C;
}

inline double binom(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random walk with reflecting barriers; interior rows move -1/0/+1 with
// Bin(2, theta) probabilities ((1-t)^2, 2t(1-t), t^2). Scalar theta in [0,1].
// ---------------------------------------------------------------------------
class BinomialWalk final : public ParametricFamily {
 public:
  explicit BinomialWalk(int K) : K_(K), support_(detail::walk_support(K, true)) {
    if (K < 3) throw std::invalid_argument("binomial-walk: K must be >= 3");
  }

  std::string name() const override { return "binomial-walk"; }
  int num_states() const override { return K_; }
  int dim() const override { return 1; }
  const std::vector<SupportCell>& support() const override { return support_; }
  bool separable() const override { return true; }
  int row_coordinate(int row) const override { return (row > 0 && row + 1 < K_) ? 0 : -1; }

  Matrix transition(const Vector& theta) const override {
    check_in_box(theta);
    const double t = theta(0);
    Matrix P = Matrix::Zero(K_, K_);
    P(0, 1) = 1.0;
    P(K_ - 1, K_ - 2) = 1.0;
    for (int i = 1; i + 1 < K_; ++i) {
      P(i, i - 1) = (1.0 - t) * (1.0 - t);
      P(i, i) = 2.0 * t * (1.0 - t);
      P(i, i + 1) = t * t;
    }
    return P;
  }

  Matrix jacobian(const Vector& theta) const override {
    check_in_box(theta);
    const double t = theta(0);
    Matrix J = Matrix::Zero(static_cast<Eigen::Index>(support_.size()), 1);
    Eigen::Index k = 1;  // cell (0,1) stays zero
    for (int i = 1; i + 1 < K_; ++i) {
      J(k++, 0) = -2.0 * (1.0 - t);
      J(k++, 0) = 2.0 * (1.0 - 2.0 * t);
      J(k++, 0) = 2.0 * t;
    }
    return J;
  }

  // detailed-balance product; matches the generic linear solve to 1e-14 and
  // stays finite through theta = 1/2
  std::optional<Vector> stationary(const Vector& theta) const override {
    const double t = clamp_interior(theta)(0);
    const double rho = (t * t) / ((1.0 - t) * (1.0 - t));
    Vector w(K_);
    w(0) = (1.0 - t) * (1.0 - t);
    double r = 1.0;
    for (int i = 1; i + 1 < K_; ++i) {
      w(i) = r;
      r *= rho;
    }
    w(K_ - 1) = (r / rho) * t * t;
    return w / w.sum();
  }

  std::optional<Vector> closed_form_mle(const TransitionCounts& counts) const override {
    double num = 0.0, den = 0.0;
    for (int i = 1; i + 1 < K_; ++i) {
      num += static_cast<double>(counts.nu(i, i + 1)) + 0.5 * static_cast<double>(counts.nu(i, i));
      den += static_cast<double>(counts.nu(i, i - 1) + counts.nu(i, i) + counts.nu(i, i + 1));
    }
    if (den == 0.0) return std::nullopt;
    Vector th(1);
    th(0) = num / den;
    return th;
  }

 private:
  int K_;
  std::vector<SupportCell> support_;
};

// ---------------------------------------------------------------------------
// State-dependent version: row i uses its own theta_i, i = 2..K-1 (1-based),
// so d = K-2. Coordinates are independent.
// ---------------------------------------------------------------------------
class MultiBinomialWalk final : public ParametricFamily {
 public:
  explicit MultiBinomialWalk(int K) : K_(K), support_(detail::walk_support(K, true)) {
    if (K < 3) throw std::invalid_argument("multi-binomial-walk: K must be >= 3");
  }

  std::string name() const override { return "multi-binomial-walk"; }
  int num_states() const override { return K_; }
  int dim() const override { return K_ - 2; }
  const std::vector<SupportCell>& support() const override { return support_; }
  bool separable() const override { return true; }
  int row_coordinate(int row) const override { return (row > 0 && row + 1 < K_) ? row - 1 : -1; }

  Matrix transition(const Vector& theta) const override {
    check_in_box(theta);
    Matrix P = Matrix::Zero(K_, K_);
    P(0, 1) = 1.0;
    P(K_ - 1, K_ - 2) = 1.0;
    for (int i = 1; i + 1 < K_; ++i) {
      const double t = theta(i - 1);
      P(i, i - 1) = (1.0 - t) * (1.0 - t);
      P(i, i) = 2.0 * t * (1.0 - t);
      P(i, i + 1) = t * t;
    }
    return P;
  }

  Matrix jacobian(const Vector& theta) const override {
    check_in_box(theta);
    Matrix J = Matrix::Zero(static_cast<Eigen::Index>(support_.size()), dim());
    Eigen::Index k = 1;
    for (int i = 1; i + 1 < K_; ++i) {
      const double t = theta(i - 1);
      const int u = i - 1;
      J(k++, u) = -2.0 * (1.0 - t);
      J(k++, u) = 2.0 * (1.0 - 2.0 * t);
      J(k++, u) = 2.0 * t;
    }
    return J;
  }

  std::optional<Vector> stationary(const Vector& theta) const override {
    const Vector th = clamp_interior(theta);
    // detailed balance: pi_{i+1}/pi_i = p_{i,i+1}/p_{i+1,i}
    Vector w(K_);
    w(0) = 1.0;
    w(1) = 1.0 / ((1.0 - th(0)) * (1.0 - th(0)));  // p_{12} = 1
    for (int i = 1; i + 2 < K_; ++i) {
      const double up = th(i - 1) * th(i - 1);
      const double down = (1.0 - th(i)) * (1.0 - th(i));
      w(i + 1) = w(i) * up / down;
    }
    w(K_ - 1) = w(K_ - 2) * th(K_ - 3) * th(K_ - 3);  // p_{K-1,K} = theta^2, p_{K,K-1} = 1
    return w / w.sum();
  }

  std::optional<Vector> closed_form_mle(const TransitionCounts& counts) const override {
    Vector th(dim());
    for (int i = 1; i + 1 < K_; ++i) {
      const double up = static_cast<double>(counts.nu(i, i + 1));
      const double st = static_cast<double>(counts.nu(i, i));
      const double dn = static_cast<double>(counts.nu(i, i - 1));
      const double tot = up + st + dn;
      if (tot == 0.0) return std::nullopt;
      th(i - 1) = (2.0 * up + st) / (2.0 * tot);
    }
    return th;
  }

 private:
  int K_;
  std::vector<SupportCell> support_;
};

/// Bernoulli-Laplace diffusion matrix; equals MultiBinomialWalk(K) at
/// theta_i = (K-i)/(K-1).
inline Matrix bernoulli_laplace(int K) {
  if (K < 2) throw std::invalid_argument("bernoulli-laplace: K must be > 1");
  Matrix P = Matrix::Zero(K, K);
  for (int i = 1; i <= K; ++i) {
    const double p = std::pow(static_cast<double>(K - i) / (K - 1), 2);
    const double q = std::pow(static_cast<double>(i - 1) / (K - 1), 2);
    const double r = 2.0 * (static_cast<double>(K - i) / (K - 1)) * (static_cast<double>(i - 1) / (K - 1));
    if (i > 1) P(i - 1, i - 2) = q;
    P(i - 1, i - 1) = r;
    if (i < K) P(i - 1, i) = p;
  }
  return P;
}

/// Null-hypothesis parameter of the Bernoulli-Laplace test: theta_i = (K-i)/(K-1).
inline Vector bernoulli_laplace_theta(int K) {
  Vector th(K - 2);
  for (int i = 2; i <= K - 1; ++i) th(i - 2) = static_cast<double>(K - i) / (K - 1);
  return th;
}

// ---------------------------------------------------------------------------
// Greenwood epidemic model. States are the number of still-uninfected
// individuals 0..K (exposed to the caller as 1..K+1); each uninfected person
// independently gets infected with probability theta per step, so
// p_ij = C(i,j) theta^(i-j) (1-theta)^j for j <= i.
// ---------------------------------------------------------------------------
class Greenwood final : public ParametricFamily {
 public:
  explicit Greenwood(int K) : K_(K) {
    if (K < 2) throw std::invalid_argument("greenwood: K must be >= 2");
    for (int i = 0; i <= K; ++i)
      for (int j = 0; j <= i; ++j) support_.emplace_back(i, j);
  }

  std::string name() const override { return "greenwood"; }
  int num_states() const override { return K_ + 1; }
  int dim() const override { return 1; }
  const std::vector<SupportCell>& support() const override { return support_; }
  bool separable() const override { return true; }
  int row_coordinate(int row) const override { return row >= 1 ? 0 : -1; }

  Matrix transition(const Vector& theta) const override {
    check_in_box(theta);
    const double t = clamp_interior(theta)(0);
    Matrix P = Matrix::Zero(K_ + 1, K_ + 1);
    for (int i = 0; i <= K_; ++i)
      for (int j = 0; j <= i; ++j)
        P(i, j) = detail::binom(i, j) * std::pow(t, i - j) * std::pow(1.0 - t, j);
    return P;
  }

  Matrix jacobian(const Vector& theta) const override {
    check_in_box(theta);
    const double t = clamp_interior(theta)(0);
    Matrix J(static_cast<Eigen::Index>(support_.size()), 1);
    for (std::size_t k = 0; k < support_.size(); ++k) {
      const int i = support_[k].first, j = support_[k].second;
      // d/dt [ C(i,j) t^(i-j) (1-t)^j ]
      const double base = detail::binom(i, j);
      double v = 0.0;
      if (i - j > 0) v += (i - j) * std::pow(t, i - j - 1) * std::pow(1.0 - t, j);
      if (j > 0) v -= j * std::pow(t, i - j) * std::pow(1.0 - t, j - 1);
      J(static_cast<Eigen::Index>(k), 0) = base * v;
    }
    return J;
  }

  // the alpha = 0 estimating equation collapses to a linear equation in theta
  std::optional<Vector> closed_form_mle(const TransitionCounts& counts) const override {
    double infections = 0.0, exposures = 0.0;
    for (int i = 1; i <= K_; ++i)
      for (int j = 0; j <= i; ++j) {
        infections += static_cast<double>(counts.nu(i, j)) * (i - j);
        exposures += static_cast<double>(counts.nu(i, j)) * i;
      }
    if (exposures == 0.0) return std::nullopt;
    Vector th(1);
    th(0) = infections / exposures;
    return th;
  }

 private:
  int K_;
  std::vector<SupportCell> support_;
};

// ---------------------------------------------------------------------------
// Simple reflecting random walk: interior rows (1-theta, 0, theta) on the two
// neighbours. MDPDE equals the MLE for every alpha on this family.
// ---------------------------------------------------------------------------
class ReflectingWalk final : public ParametricFamily {
 public:
  explicit ReflectingWalk(int K) : K_(K), support_(detail::walk_support(K, false)) {
    if (K < 3) throw std::invalid_argument("reflecting-walk: K must be >= 3");
  }

  std::string name() const override { return "reflecting-walk"; }
  int num_states() const override { return K_; }
  int dim() const override { return 1; }
  const std::vector<SupportCell>& support() const override { return support_; }
  bool separable() const override { return true; }
  int row_coordinate(int row) const override { return (row > 0 && row + 1 < K_) ? 0 : -1; }

  Matrix transition(const Vector& theta) const override {
    check_in_box(theta);
    const double t = theta(0);
    Matrix P = Matrix::Zero(K_, K_);
    P(0, 1) = 1.0;
    P(K_ - 1, K_ - 2) = 1.0;
    for (int i = 1; i + 1 < K_; ++i) {
      P(i, i - 1) = 1.0 - t;
      P(i, i + 1) = t;
    }
    return P;
  }

  Matrix jacobian(const Vector& theta) const override {
    check_in_box(theta);
    Matrix J = Matrix::Zero(static_cast<Eigen::Index>(support_.size()), 1);
    Eigen::Index k = 1;
    for (int i = 1; i + 1 < K_; ++i) {
      J(k++, 0) = -1.0;
      J(k++, 0) = 1.0;
    }
    return J;
  }

  std::optional<Vector> stationary(const Vector& theta) const override {
    const double t = clamp_interior(theta)(0);
    // pi_io = pi_1o theta^(i-2) (1-theta)^(1-i) for interior i
    Vector w(K_);
    w(0) = 1.0 - t;
    double r = 1.0;
    for (int i = 1; i + 1 < K_; ++i) {
      w(i) = r;
      r *= t / (1.0 - t);
    }
    w(K_ - 1) = (r / (t / (1.0 - t))) * t;
    return w / w.sum();
  }

  std::optional<Vector> closed_form_mle(const TransitionCounts& counts) const override {
    double up = 0.0, tot = 0.0;
    for (int i = 1; i + 1 < K_; ++i) {
      up += static_cast<double>(counts.nu(i, i + 1));
      tot += static_cast<double>(counts.nu(i, i - 1) + counts.nu(i, i + 1));
    }
    if (tot == 0.0) return std::nullopt;
    Vector th(1);
    th(0) = up / tot;
    return th;
  }

 private:
  int K_;
  std::vector<SupportCell> support_;
};

// ---------------------------------------------------------------------------
// Clubbed credit-migration model: 8 ordered rating states AAA..CCC/C plus the
// absorbing default state D. Each interior rating i = 2..7 has a three-outcome
// row -- upgrade (1-theta_i)^2, steady theta_i^2, downgrade 2 theta_i (1-theta_i) --
// represented on the cells (i,i-1), (i,i), (i,i+1). The AAA row has no valid
// parametric form in this model and is not estimated; D is absorbing.
// ---------------------------------------------------------------------------
class CreditClubbed final : public ParametricFamily {
 public:
  static constexpr int kStates = 8;

  CreditClubbed() {
    support_.emplace_back(0, 0);  // AAA placeholder, theta-free
    for (int i = 1; i <= 6; ++i) {
      support_.emplace_back(i, i - 1);
      support_.emplace_back(i, i);
      support_.emplace_back(i, i + 1);
    }
    support_.emplace_back(7, 7);  // D absorbing
  }

  std::string name() const override { return "credit-clubbed"; }
  int num_states() const override { return kStates; }
  int dim() const override { return 6; }
  const std::vector<SupportCell>& support() const override { return support_; }
  bool separable() const override { return true; }
  int row_coordinate(int row) const override { return (row >= 1 && row <= 6) ? row - 1 : -1; }

  Matrix transition(const Vector& theta) const override {
    check_in_box(theta);
    Matrix P = Matrix::Zero(kStates, kStates);
    P(0, 0) = 1.0;  // AAA row not modeled; placeholder keeps the matrix stochastic
    P(7, 7) = 1.0;
    for (int i = 1; i <= 6; ++i) {
      const double t = theta(i - 1);
      P(i, i - 1) = (1.0 - t) * (1.0 - t);  // upgrade
      P(i, i) = t * t;                      // steady
      P(i, i + 1) = 2.0 * t * (1.0 - t);    // downgrade
    }
    return P;
  }

  Matrix jacobian(const Vector& theta) const override {
    check_in_box(theta);
    Matrix J = Matrix::Zero(static_cast<Eigen::Index>(support_.size()), dim());
    Eigen::Index k = 1;
    for (int i = 1; i <= 6; ++i) {
      const double t = theta(i - 1);
      const int u = i - 1;
      J(k++, u) = -2.0 * (1.0 - t);
      J(k++, u) = 2.0 * t;
      J(k++, u) = 2.0 - 4.0 * t;
    }
    return J;
  }

  std::optional<Vector> closed_form_mle(const TransitionCounts& counts) const override {
    Vector th(dim());
    for (int i = 1; i <= 6; ++i) {
      const double up = static_cast<double>(counts.nu(i, i - 1));
      const double st = static_cast<double>(counts.nu(i, i));
      const double dn = static_cast<double>(counts.nu(i, i + 1));
      const double tot = up + st + dn;
      if (tot == 0.0) return std::nullopt;
      th(i - 1) = (2.0 * st + dn) / (2.0 * tot);
    }
    return th;
  }

  /// MLE from a single clubbed row given as proportions (up, steady, down).
  static double row_mle(double up, double steady, double down) {
    const double tot = up + steady + down;
    return (2.0 * steady + down) / (2.0 * tot);
  }

 private:
  std::vector<SupportCell> support_;
};

// ---------------------------------------------------------------------------

inline FamilyPtr make_family(const std::string& id, int K) {
  if (id == "binomial-walk") return std::make_shared<BinomialWalk>(K);
  if (id == "multi-binomial-walk") return std::make_shared<MultiBinomialWalk>(K);
  if (id == "greenwood") return std::make_shared<Greenwood>(K);
  if (id == "reflecting-walk") return std::make_shared<ReflectingWalk>(K);
  if (id == "credit-clubbed") return std::make_shared<CreditClubbed>();
  throw std::invalid_argument("unknown family '" + id +
                              "' (expected binomial-walk, multi-binomial-walk, greenwood, "
                              "reflecting-walk or credit-clubbed)");
}

}  // namespace mdpde
