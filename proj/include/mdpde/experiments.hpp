#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "mdpde/asymptotics.hpp"
#include "mdpde/chain.hpp"
#include "mdpde/dpd.hpp"
#include "mdpde/families.hpp"
#include "mdpde/hypothesis.hpp"

namespace mdpde {

/// Runs fn(replicate) for replicate = 0..n-1 across a thread pool. Each
/// replicate derives its own seed, so results are independent of the
/// schedule; callers aggregate the per-replicate outputs in index order.
inline void parallel_replicates(int n, const std::function<void(int)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw == 1 || n < 8) {
    for (int r = 0; r < n; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < hw; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= n) return;
        fn(r);
      }
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Empirical MSE experiment (binomial-walk and greenwood designs)
// ---------------------------------------------------------------------------

struct MseRow {
  std::string family;
  double alpha = 0.0;
  double epsilon = 0.0;
  std::int64_t T = 0;
  double mse = 0.0;
};

struct MseExperimentConfig {
  std::string family = "binomial-walk";  // or "greenwood"
  int K = 10;                            // greenwood uses K = 9 (states 0..9)
  double theta = 0.25;
  std::vector<double> alphas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> epsilons = {0.0, 0.1, 0.15, 0.2};
  std::vector<std::int64_t> lengths = {50, 100};
  int replicates = 1000;
  std::uint64_t seed = 20180425;
};

/// Greenwood epidemic path of fixed length that regenerates: once everyone is
/// infected (state 0) the next step restarts a fresh epidemic at K uninfected.
/// Regeneration is what makes the observed chain ergodic; without it the path
/// is absorbed after a handful of steps and carries no further information.
inline StateSequence simulate_greenwood_regenerating(int K, double theta, std::int64_t steps,
                                                     std::uint64_t seed) {
  const Greenwood fam(K);
  Vector th(1);
  th(0) = theta;
  const Matrix P = fam.transition(th);
  StateSequence seq;
  seq.num_states = K + 1;
  seq.states.resize(static_cast<std::size_t>(steps) + 1);
  seq.states[0] = K + 1;  // all uninfected (state K, stored 1-based)
  Rng rng(seed);
  int cur = K;  // 0-based uninfected count
  for (std::int64_t t = 0; t < steps; ++t) {
    if (cur == 0) {
      cur = K;  // fresh epidemic
    } else {
      const double u = rng.uniform();
      double acc = 0.0;
      int nxt = 0;
      for (int j = 0; j <= cur; ++j) {
        acc += P(cur, j);
        if (u < acc) { nxt = j; break; }
      }
      cur = nxt;
    }
    seq.states[static_cast<std::size_t>(t) + 1] = cur + 1;
  }
  return seq;
}

inline std::vector<MseRow> mse_experiment(const MseExperimentConfig& cfg) {
  const bool greenwood = cfg.family == "greenwood";
  if (!greenwood && cfg.family != "binomial-walk")
    throw std::invalid_argument("mse_experiment: family must be binomial-walk or greenwood");
  if (cfg.replicates < 100) throw std::invalid_argument("mse_experiment: need >= 100 replicates");
  const FamilyPtr fam = greenwood ? make_family("greenwood", cfg.K)
                                  : make_family("binomial-walk", cfg.K);
  Vector theta0(1);
  theta0(0) = cfg.theta;

  std::vector<MseRow> rows;
  for (std::int64_t T : cfg.lengths) {
    for (double eps : cfg.epsilons) {
      // per replicate, per alpha squared errors; summed in index order
      std::vector<std::vector<double>> sq(static_cast<std::size_t>(cfg.replicates),
                                          std::vector<double>(cfg.alphas.size(), 0.0));
      parallel_replicates(cfg.replicates, [&](int r) {
        const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(r) +
                                                          1000003ULL * static_cast<std::uint64_t>(T) +
                                                          7ULL * static_cast<std::uint64_t>(eps * 1000));
        StateSequence path;
        ContaminationSpec spec;
        spec.epsilon = eps;
        spec.seed = derive_seed(s, 1);
        if (greenwood) {
          path = simulate_greenwood_regenerating(cfg.K, cfg.theta, T, s);
          spec.scheme = ContaminationScheme::AbsorbToState;
          spec.target_state = 1;  // everyone infected
        } else {
          path = simulate_chain(fam->transition(theta0), 1, T, s);
          spec.scheme = ContaminationScheme::ReplaceForward;
        }
        const StateSequence obs = eps > 0.0 ? contaminate(path, spec) : path;
        const EmpiricalTransition emp = empirical_estimates(count_transitions(obs));
        for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
          DpdConfig dc;
          dc.alpha = cfg.alphas[a];
          dc.off_support = OffSupportPolicy::Drop;  // contamination puts mass off C
          const DpdEstimate est = estimate(*fam, emp, dc);
          const double err = est.theta_hat(0) - cfg.theta;
          sq[static_cast<std::size_t>(r)][a] = err * err;
        }
      });
      for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        double total = 0.0;
        for (int r = 0; r < cfg.replicates; ++r) total += sq[static_cast<std::size_t>(r)][a];
        rows.push_back({cfg.family, cfg.alphas[a], eps, T, total / cfg.replicates});
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Monte-Carlo harnesses used by the validation suite
// ---------------------------------------------------------------------------

/// Empirical rejection rate of the simple-hypothesis Wald test on the
/// binomial walk at the null.
inline double wald_size_binomial_walk(int K, double theta0, std::int64_t T, double alpha,
                                      int replicates, double level, std::uint64_t seed) {
  const BinomialWalk fam(K);
  Vector th0(1);
  th0(0) = theta0;
  const Matrix P = fam.transition(th0);
  const Constraint c = simple_constraint(th0);
  std::vector<char> rejected(static_cast<std::size_t>(replicates), 0);
  parallel_replicates(replicates, [&](int r) {
    const StateSequence seq = simulate_chain(P, 1, T, derive_seed(seed, static_cast<std::uint64_t>(r)));
    const EmpiricalTransition emp = empirical_estimates(count_transitions(seq));
    DpdConfig dc;
    dc.alpha = alpha;
    const DpdEstimate est = estimate(fam, emp, dc);
    const AsymptoticReport rep = model_matrices(fam, est.theta_hat, alpha);
    const WaldResult w = wald_composite(est, rep, c, T);
    rejected[static_cast<std::size_t>(r)] = w.p_value < level ? 1 : 0;
  });
  double n = 0.0;
  for (char x : rejected) n += x;
  return n / replicates;
}

/// Empirical rejection rate of the Bernoulli-Laplace test under the null.
inline double wald_size_bernoulli_laplace(int K, std::int64_t T, double alpha, int replicates,
                                          double level, std::uint64_t seed,
                                          double contamination = 0.0) {
  const MultiBinomialWalk fam(K);
  const Vector theta0 = bernoulli_laplace_theta(K);
  const Matrix P = bernoulli_laplace(K);
  std::vector<char> rejected(static_cast<std::size_t>(replicates), 0);
  parallel_replicates(replicates, [&](int r) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r));
    StateSequence seq = simulate_chain(P, (K + 1) / 2, T, s);
    if (contamination > 0.0) {
      ContaminationSpec spec;
      spec.epsilon = contamination;
      spec.scheme = ContaminationScheme::ReplaceForward;
      spec.seed = derive_seed(s, 1);
      seq = contaminate(seq, spec);
    }
    const EmpiricalTransition emp = empirical_estimates(count_transitions(seq));
    DpdConfig dc;
    dc.alpha = alpha;
    dc.off_support = OffSupportPolicy::Drop;
    const DpdEstimate est = estimate(fam, emp, dc);
    const WaldResult w = wald_bernoulli_laplace(est.theta_hat, T, K, alpha);
    rejected[static_cast<std::size_t>(r)] = w.p_value < level ? 1 : 0;
  });
  double n = 0.0;
  for (char x : rejected) n += x;
  return n / replicates;
}

/// Empirical rejection rate of the two-sample test with both samples drawn
/// from the same binomial walk.
inline double two_sample_size_binomial_walk(int K, double theta0, std::int64_t T, double alpha,
                                            int replicates, double level, std::uint64_t seed) {
  const BinomialWalk fam(K);
  Vector th0(1);
  th0(0) = theta0;
  const Matrix P = fam.transition(th0);
  std::vector<char> rejected(static_cast<std::size_t>(replicates), 0);
  parallel_replicates(replicates, [&](int r) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r));
    DpdConfig dc;
    dc.alpha = alpha;
    const StateSequence s1 = simulate_chain(P, 1, T, derive_seed(s, 1));
    const StateSequence s2 = simulate_chain(P, 1, T, derive_seed(s, 2));
    const DpdEstimate e1 = estimate(fam, empirical_estimates(count_transitions(s1)), dc);
    const DpdEstimate e2 = estimate(fam, empirical_estimates(count_transitions(s2)), dc);
    const AsymptoticReport r1 = model_matrices(fam, e1.theta_hat, alpha);
    const AsymptoticReport r2 = model_matrices(fam, e2.theta_hat, alpha);
    const WaldResult w = two_sample(e1, e2, r1, r2, T, T);
    rejected[static_cast<std::size_t>(r)] = w.p_value < level ? 1 : 0;
  });
  double n = 0.0;
  for (char x : rejected) n += x;
  return n / replicates;
}

/// Empirical coverage of the level-`level` confidence interval on the
/// binomial walk (model-specific variance).
inline double ci_coverage_binomial_walk(int K, double theta0, std::int64_t T, double alpha,
                                        int replicates, double level, std::uint64_t seed) {
  const BinomialWalk fam(K);
  Vector th0(1);
  th0(0) = theta0;
  const Matrix P = fam.transition(th0);
  std::vector<char> covered(static_cast<std::size_t>(replicates), 0);
  parallel_replicates(replicates, [&](int r) {
    const StateSequence seq = simulate_chain(P, 1, T, derive_seed(seed, static_cast<std::uint64_t>(r)));
    DpdConfig dc;
    dc.alpha = alpha;
    const DpdEstimate est = estimate(fam, empirical_estimates(count_transitions(seq)), dc);
    const AsymptoticReport rep = model_matrices(fam, est.theta_hat, alpha, T);
    const auto ci = confidence_intervals(est.theta_hat, rep, level);
    covered[static_cast<std::size_t>(r)] =
        (ci[0].lower <= theta0 && theta0 <= ci[0].upper) ? 1 : 0;
  });
  double n = 0.0;
  for (char x : covered) n += x;
  return n / replicates;
}

/// Monte-Carlo covariance of sqrt(T) (pihat_C - pi_C) over replicated chains
/// started from the stationary law; compared against Lambda by the caller.
inline Matrix empirical_lambda(const Matrix& P, const std::vector<SupportCell>& C, std::int64_t T,
                               int replicates, std::uint64_t seed) {
  const Vector pio = stationary_distribution(P).pi;
  const Eigen::Index c = static_cast<Eigen::Index>(C.size());
  std::vector<Vector> rows(static_cast<std::size_t>(replicates));
  parallel_replicates(replicates, [&](int r) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r));
    Rng rng(s);
    const int x0 = sample_state(pio, rng);
    const StateSequence seq = simulate_chain(P, x0, T, derive_seed(s, 7));
    const EmpiricalTransition emp = empirical_estimates(count_transitions(seq));
    Vector v(c);
    for (Eigen::Index k = 0; k < c; ++k) {
      const auto [i, j] = C[static_cast<std::size_t>(k)];
      v(k) = std::sqrt(static_cast<double>(T)) * (emp.pi_hat(i, j) - P(i, j));
    }
    rows[static_cast<std::size_t>(r)] = v;
  });
  Vector mean = Vector::Zero(c);
  for (const auto& v : rows) mean += v;
  mean /= static_cast<double>(replicates);
  Matrix cov = Matrix::Zero(c, c);
  for (const auto& v : rows) {
    const Vector d = v - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(replicates - 1);
}

}  // namespace mdpde
