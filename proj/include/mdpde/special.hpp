#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mdpde {

namespace detail {

// Regularized lower incomplete gamma P(a,x): series for x < a+1,
// continued fraction for the complement otherwise (Lentz's algorithm).
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a,x).
inline double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: domain");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

inline double chi2_cdf(double x, double df) {
  if (df < 1.0) throw std::invalid_argument("chi2_cdf: df must be >= 1");
  if (x < 0.0) throw std::invalid_argument("chi2_cdf: x must be >= 0");
  if (x == 0.0) return 0.0;
  return gamma_p(df / 2.0, x / 2.0);
}

inline double chi2_pdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double h = df / 2.0;
  return std::exp((h - 1.0) * std::log(x) - x / 2.0 - h * std::log(2.0) - std::lgamma(h));
}

/// Quantile by Wilson-Hilferty start, Newton steps, bisection fallback;
/// |cdf(quantile(p)) - p| < 1e-10.
inline double chi2_quantile(double p, double df) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("chi2_quantile: p in (0,1)");
  if (df < 1.0) throw std::invalid_argument("chi2_quantile: df must be >= 1");
  const double c = 2.0 / (9.0 * df);
  double zp;
  {
    // crude normal quantile is enough for a starting point
    const double t = p < 0.5 ? std::sqrt(-2.0 * std::log(p)) : std::sqrt(-2.0 * std::log1p(-p));
    double z = t - (2.30753 + 0.27061 * t) / (1.0 + t * (0.99229 + 0.04481 * t));
    zp = p < 0.5 ? -z : z;
  }
  double x = df * std::pow(1.0 - c + zp * std::sqrt(c), 3);
  if (!(x > 0.0) || !std::isfinite(x)) x = df;

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, df) - p;
    if (std::abs(f) < 1e-12) return x;
    if (f > 0.0) hi = x; else lo = x;
    const double d = chi2_pdf(x, df);
    double nx = d > 0.0 ? x - f / d : -1.0;
    if (!(nx > lo) || !(nx < hi))
      nx = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * x + 1.0;
    if (std::abs(nx - x) < 1e-14 * std::max(1.0, x)) return nx;
    x = nx;
  }
  return x;
}

/// CDF of the noncentral chi-square: Poisson(delta/2) mixture of central
/// chi-square CDFs, truncated once the remaining Poisson tail drops below
/// 1e-12.
inline double noncentral_chi2_cdf(double x, double df, double delta) {
  if (delta < 0.0) throw std::invalid_argument("noncentral_chi2_cdf: delta must be >= 0");
  if (x < 0.0) throw std::invalid_argument("noncentral_chi2_cdf: x must be >= 0");
  if (delta == 0.0) return chi2_cdf(x, df);
  if (x == 0.0) return 0.0;
  const double half = delta / 2.0;
  double logw = -half;  // log Poisson weight at k = 0
  double acc = 0.0, covered = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double w = std::exp(logw);
    acc += w * chi2_cdf(x, df + 2.0 * k);
    covered += w;
    if (1.0 - covered < 1e-12 && k > half) break;
    logw += std::log(half / (k + 1.0));
  }
  return acc;
}

/// Inverse standard normal CDF (Acklam's rational approximation refined with
/// one Halley step against erfc); absolute error below 1e-13.
inline double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_quantile: p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace mdpde
