#include <catch_amalgamated.hpp>

#include <cmath>

#include "mdpde/chain.hpp"
#include "mdpde/dpd.hpp"
#include "mdpde/families.hpp"
#include "mdpde/experiments.hpp"
#include "mdpde/hypothesis.hpp"

using namespace mdpde;

namespace {

DpdEstimate fit(const ParametricFamily& fam, const StateSequence& seq, double alpha) {
  DpdConfig cfg;
  cfg.alpha = alpha;
  return estimate(fam, empirical_estimates(count_transitions(seq)), cfg);
}

}  // namespace

TEST_CASE("wald statistic is zero when the null holds exactly") {
  const BinomialWalk fam(6);
  Vector th(1);
  th(0) = 0.3;
  const auto seq = simulate_chain(fam.transition(th), 1, 3000, 5);
  auto est = fit(fam, seq, 0.5);
  const auto rep = model_matrices(fam, est.theta_hat, 0.5);
  est.theta_hat(0) = 0.3;  // force h(theta_hat) = 0
  const auto w = wald_composite(est, rep, simple_constraint(th), 3000);
  CHECK(w.statistic == 0.0);
  CHECK(w.p_value == 1.0);
  CHECK_FALSE(w.reject_at.at(0.05));
}

TEST_CASE("wald full-vector constraint equals the direct quadratic form") {
  const MultiBinomialWalk fam(5);
  Vector th(3);
  th << 0.7, 0.5, 0.3;
  const auto seq = simulate_chain(fam.transition(th), 2, 4000, 6);
  const auto est = fit(fam, seq, 0.5);
  const auto rep = model_matrices(fam, est.theta_hat, 0.5);
  const auto w = wald_composite(est, rep, simple_constraint(th), 4000);

  const Vector d = est.theta_hat - th;
  const double direct = 4000.0 * d.dot(rep.sigma.fullPivLu().solve(d));
  CHECK(std::abs(w.statistic - direct) < 1e-10 * std::max(1.0, direct));
  CHECK(w.df == 3);
  CHECK(w.p_value == Catch::Approx(1.0 - chi2_cdf(w.statistic, 3)).margin(1e-12));
}

TEST_CASE("wald p-values decrease in the statistic") {
  double prev = 1.1;
  for (double stat : {0.0, 0.5, 2.0, 5.0, 12.0}) {
    const double p = 1.0 - chi2_cdf(stat, 2);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("wald noncentrality under a supplied drift") {
  const BinomialWalk fam(6);
  Vector th(1);
  th(0) = 0.3;
  const auto seq = simulate_chain(fam.transition(th), 1, 2000, 7);
  const auto est = fit(fam, seq, 0.5);
  const auto rep = model_matrices(fam, est.theta_hat, 0.5);
  Vector drift(1);
  drift(0) = 2.0;
  const auto w = wald_composite(est, rep, simple_constraint(th), 2000, drift);
  REQUIRE(w.noncentrality.has_value());
  CHECK(*w.noncentrality == Catch::Approx(4.0 / rep.sigma(0, 0)).epsilon(1e-10));
  // the noncentral law at delta = 0 is the null law
  CHECK(noncentral_chi2_cdf(3.0, 1, 0.0) == chi2_cdf(3.0, 1));
}

TEST_CASE("bernoulli-laplace test vanishes at the null parameter") {
  const auto w = wald_bernoulli_laplace(bernoulli_laplace_theta(5), 5000, 5, 0.5);
  CHECK(w.statistic == 0.0);
  CHECK(w.df == 3);
  CHECK(w.p_value == 1.0);
}

TEST_CASE("bernoulli-laplace test detects a wrong diffusion parameter") {
  Vector off = bernoulli_laplace_theta(5);
  off(1) += 0.1;
  const auto w = wald_bernoulli_laplace(off, 5000, 5, 0.5);
  CHECK(w.statistic > chi2_quantile(0.99, 3));
  CHECK(w.reject_at.at(0.05));
}

TEST_CASE("two-sample statistic is symmetric and vanishes on identical data") {
  const BinomialWalk fam(8);
  Vector th(1);
  th(0) = 0.25;
  const auto s1 = simulate_chain(fam.transition(th), 1, 2000, 11);
  const auto s2 = simulate_chain(fam.transition(th), 1, 1500, 12);
  const auto e1 = fit(fam, s1, 0.5);
  const auto e2 = fit(fam, s2, 0.5);
  const auto r1 = model_matrices(fam, e1.theta_hat, 0.5);
  const auto r2 = model_matrices(fam, e2.theta_hat, 0.5);

  const auto w12 = two_sample(e1, e2, r1, r2, 2000, 1500);
  const auto w21 = two_sample(e2, e1, r2, r1, 1500, 2000);
  CHECK(w12.statistic == Catch::Approx(w21.statistic).epsilon(1e-12));
  CHECK(w12.df == 1);

  const auto same = two_sample(e1, e1, r1, r1, 2000, 2000);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);
}

TEST_CASE("two-sample checks its preconditions") {
  const BinomialWalk fam(6);
  Vector th(1);
  th(0) = 0.3;
  const auto s1 = simulate_chain(fam.transition(th), 1, 500, 1);
  auto e1 = fit(fam, s1, 0.5);
  auto e2 = e1;
  e2.alpha = 0.25;
  const auto r = model_matrices(fam, e1.theta_hat, 0.5);
  CHECK_THROWS_AS(two_sample(e1, e2, r, r, 500, 500), std::invalid_argument);
  e2.alpha = e1.alpha;
  CHECK_THROWS_AS(two_sample(e1, e2, r, r, 0, 500), std::invalid_argument);
}

TEST_CASE("second-order influence of the test functional") {
  SECTION("zero IF gives zero IF2") {
    Vector th0(1);
    th0(0) = 0.3;
    Matrix sigma = Matrix::Identity(1, 1);
    CHECK(test_if2(simple_constraint(th0), th0, Vector::Zero(1), sigma) == 0.0);
  }
  SECTION("scalar case reduces to 2 IF^2 H^2 / Sigma*") {
    Vector th0(1);
    th0(0) = 0.3;
    Constraint c;
    c.r = 1;
    c.h = [](const Vector& t) { return Vector(3.0 * (t.array() - 0.3).matrix()); };  // H = 3
    Matrix sigma(1, 1);
    sigma << 0.7;
    Vector iff(1);
    iff(0) = 0.2;
    const double expected = 2.0 * 0.2 * 0.2 * 9.0 / (9.0 * 0.7);
    CHECK(test_if2(c, th0, iff, sigma) == Catch::Approx(expected).epsilon(1e-9));
  }
  SECTION("curvature oracle on the reflecting walk") {
    // first-order IF of the test functional vanishes at the null, so
    // W(Pi_eps) ~ IF2 eps^2 / 2; the symmetric second difference of the
    // statistic functional recovers IF2
    const ReflectingWalk fam(5);
    Vector th(1);
    th(0) = 0.3;
    const Matrix P = fam.transition(th);
    const Vector pio = *fam.stationary(th);
    const double a = 0.5;
    const std::vector<int> t = {1, 2, 3, 2, 3};

    const Vector iff = influence_function(fam, th, P, pio, t, a);
    const auto rep = model_matrices(fam, th, a);
    const Constraint c = simple_constraint(th);
    const double if2 = test_if2(c, th, iff, rep.sigma);

    const auto w_of = [&](const Matrix& pi) {
      DpdConfig cfg;
      cfg.alpha = a;
      cfg.tol_grad = 1e-13;
      const Vector w = stationary_distribution(pi).pi;
      const Vector th_eps = estimate(fam, make_empirical(pi, w), cfg).theta_hat;
      const auto rep_eps = model_matrices(fam, th_eps, a);
      const Vector h = c.h(th_eps);
      const Matrix H = c.derivative(th_eps);
      const Matrix s = H.transpose() * rep_eps.sigma * H;
      return h.dot(s.fullPivLu().solve(h));
    };

    const double eps = 1e-3;
    Matrix D = Matrix::Zero(5, 5);
    for (int i = 0; i < 5; ++i) D(i, t[static_cast<std::size_t>(i)]) = 1.0;
    const double w_plus = w_of((1.0 - eps) * P + eps * D);
    const double w_minus = w_of((1.0 + eps) * P - eps * D);
    const double curvature = (w_plus + w_minus) / (eps * eps);  // W(Pi_0) = 0
    CHECK(std::abs(curvature - if2) <= 5e-2 * std::max(if2, 1e-12));

    // the O(eps) term vanishes: first-order IF of the test functional is 0
    const double first_order = (w_plus - w_minus) / (2.0 * eps);
    CHECK(std::abs(first_order) < 50.0 * eps * std::max(1.0, if2));
  }
}

TEST_CASE("wald power grows with T under a fixed alternative") {
  const BinomialWalk fam(10);
  Vector th0(1);
  th0(0) = 0.25;
  Vector alt(1);
  alt(0) = 0.35;
  const Matrix Palt = fam.transition(alt);
  const auto power_at = [&](std::int64_t T) {
    int rej = 0;
    const int R = 200;
    for (int r = 0; r < R; ++r) {
      const auto seq = simulate_chain(Palt, 1, T, derive_seed(77, static_cast<std::uint64_t>(r)));
      DpdConfig cfg;
      cfg.alpha = 0.5;
      const auto est = estimate(fam, empirical_estimates(count_transitions(seq)), cfg);
      const auto rep = model_matrices(fam, est.theta_hat, 0.5);
      if (wald_composite(est, rep, simple_constraint(th0), T).p_value < 0.05) ++rej;
    }
    return rej / static_cast<double>(R);
  };
  const double p100 = power_at(100), p300 = power_at(300), p1000 = power_at(1000);
  CHECK(p100 > 0.3);  // far above the 5% size
  CHECK(p300 > p100);
  CHECK(p1000 >= 0.99);
}

TEST_CASE("contaminated diffusion test rejects less at the robust alpha") {
  // forward contamination biases every theta_i upward; the alpha = 0.5 test
  // statistic absorbs it better and its rejection rate stays nearer nominal
  const double dirty_mle = wald_size_bernoulli_laplace(5, 800, 0.0, 400, 0.05, 606, 0.05);
  const double dirty_robust = wald_size_bernoulli_laplace(5, 800, 0.5, 400, 0.05, 606, 0.05);
  CHECK(dirty_robust < dirty_mle);
  CHECK(std::abs(dirty_robust - 0.05) < std::abs(dirty_mle - 0.05));
}
