#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpde/rng.hpp"

namespace mdpde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observed path of a finite chain. States are 1-based (1..K), matching the
/// on-disk text format; matrix/row indices elsewhere are 0-based.
struct StateSequence {
  std::vector<int> states;
  int num_states = 0;

  void validate() const {
    if (num_states < 1) throw std::invalid_argument("StateSequence: K must be >= 1");
    for (int s : states)
      if (s < 1 || s > num_states)
        throw std::invalid_argument("StateSequence: state out of range 1..K");
  }
};

struct TransitionCounts {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> nu;  // K x K
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> nu_row;           // row sums
  std::int64_t total = 0;

  int num_states() const { return static_cast<int>(nu.rows()); }
};

struct EmpiricalTransition {
  Matrix pi_hat;        // K x K, unvisited rows all-zero
  Vector pi_init_hat;   // K
  std::vector<bool> visited;

  int num_states() const { return static_cast<int>(pi_hat.rows()); }
};

enum class ContaminationScheme { ReplaceForward, AbsorbToState };

struct ContaminationSpec {
  double epsilon = 0.0;
  ContaminationScheme scheme = ContaminationScheme::ReplaceForward;
  int target_state = 1;  // 1-based, absorb scheme only
  std::uint64_t seed = 0;
};

struct StationaryResult {
  Vector pi;
  bool unique = true;
};

inline TransitionCounts count_transitions(const StateSequence& seq) {
  seq.validate();
  if (seq.states.size() < 2)
    throw std::invalid_argument("count_transitions: no transitions (sequence shorter than 2)");
  const int K = seq.num_states;
  TransitionCounts out;
  out.nu.setZero(K, K);
  for (std::size_t t = 0; t + 1 < seq.states.size(); ++t)
    out.nu(seq.states[t] - 1, seq.states[t + 1] - 1) += 1;
  out.nu_row = out.nu.rowwise().sum();
  out.total = static_cast<std::int64_t>(seq.states.size()) - 1;
  return out;
}

inline EmpiricalTransition empirical_estimates(const TransitionCounts& counts) {
  if (counts.total <= 0) throw std::invalid_argument("empirical_estimates: total count is zero");
  const int K = counts.num_states();
  EmpiricalTransition out;
  out.pi_hat.setZero(K, K);
  out.pi_init_hat.resize(K);
  out.visited.assign(K, false);
  for (int i = 0; i < K; ++i) {
    const double rowsum = static_cast<double>(counts.nu_row(i));
    out.pi_init_hat(i) = rowsum / static_cast<double>(counts.total);
    if (counts.nu_row(i) > 0) {
      out.visited[i] = true;
      for (int j = 0; j < K; ++j)
        out.pi_hat(i, j) = static_cast<double>(counts.nu(i, j)) / rowsum;
    }
  }
  return out;
}

/// Empirical object built directly from a transition matrix and row weights;
/// used by the functional form of the estimator (e.g. influence analysis) and
/// by Fisher-consistency checks.
inline EmpiricalTransition make_empirical(const Matrix& pi, const Vector& weights) {
  const int K = static_cast<int>(pi.rows());
  if (pi.cols() != K || weights.size() != K)
    throw std::invalid_argument("make_empirical: dimension mismatch");
  EmpiricalTransition out;
  out.pi_hat = pi;
  out.pi_init_hat = weights;
  out.visited.assign(K, false);
  for (int i = 0; i < K; ++i) out.visited[i] = weights(i) > 0.0;
  return out;
}

inline void check_row_stochastic(const Matrix& p, double tol = 1e-10) {
  if (p.rows() != p.cols()) throw std::invalid_argument("transition matrix must be square");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > tol)
      throw std::invalid_argument("row " + std::to_string(i + 1) + " of transition matrix does not sum to 1");
    if ((p.row(i).array() < -tol).any())
      throw std::invalid_argument("transition matrix has negative entries");
  }
}

inline StateSequence simulate_chain(const Matrix& p, int x0, std::int64_t steps,
                                    std::uint64_t seed) {
  check_row_stochastic(p);
  const int K = static_cast<int>(p.rows());
  if (x0 < 1 || x0 > K) throw std::invalid_argument("simulate_chain: x0 outside 1..K");
  StateSequence seq;
  seq.num_states = K;
  seq.states.resize(static_cast<std::size_t>(steps) + 1);
  seq.states[0] = x0;
  Rng rng(seed);
  int cur = x0 - 1;
  for (std::int64_t t = 0; t < steps; ++t) {
    const double u = rng.uniform();
    double acc = 0.0;
    int nxt = K - 1;
    for (int j = 0; j < K; ++j) {
      acc += p(cur, j);
      if (u < acc) { nxt = j; break; }
    }
    cur = nxt;
    seq.states[static_cast<std::size_t>(t) + 1] = cur + 1;
  }
  return seq;
}

/// Draws a state from a probability vector (used for stationary starts).
inline int sample_state(const Vector& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int j = 0; j < probs.size(); ++j) {
    acc += probs(j);
    if (u < acc) return j + 1;
  }
  return static_cast<int>(probs.size());
}

inline StateSequence contaminate(const StateSequence& seq, const ContaminationSpec& spec) {
  seq.validate();
  if (spec.epsilon < 0.0 || spec.epsilon > 1.0)
    throw std::invalid_argument("contaminate: epsilon outside [0,1]");
  const int K = seq.num_states;
  if (spec.scheme == ContaminationScheme::AbsorbToState &&
      (spec.target_state < 1 || spec.target_state > K))
    throw std::invalid_argument("contaminate: absorb target outside 1..K");

  const std::int64_t T = static_cast<std::int64_t>(seq.states.size()) - 1;
  const std::int64_t m = std::llround(spec.epsilon * static_cast<double>(T));
  StateSequence out = seq;
  if (m == 0) return out;

  // sample m positions from {1..T} without replacement (partial Fisher-Yates)
  std::vector<std::int64_t> idx(static_cast<std::size_t>(T));
  std::iota(idx.begin(), idx.end(), 1);
  Rng rng(spec.seed);
  for (std::int64_t k = 0; k < m; ++k) {
    const std::int64_t j = k + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(T - k)));
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(j)]);
  }
  std::sort(idx.begin(), idx.begin() + m);
  // ascending order: a rewritten X_{t-1} feeds the forward move at position t,
  // so consecutive contaminated positions form a forward run
  for (std::int64_t k = 0; k < m; ++k) {
    const std::size_t t = static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
    if (spec.scheme == ContaminationScheme::ReplaceForward)
      out.states[t] = std::min(out.states[t - 1] + 1, K);
    else
      out.states[t] = spec.target_state;
  }
  return out;
}

/// Solves pi^T P = pi^T, sum(pi) = 1 through the normal equations of the
/// stacked system. A reducible chain (stationary law not unique) is reported
/// through `unique = false`; the returned vector is then one valid solution.
inline StationaryResult stationary_distribution(const Matrix& p) {
  check_row_stochastic(p);
  const int K = static_cast<int>(p.rows());
  Matrix A(K + 1, K);
  A.topRows(K) = Matrix::Identity(K, K) - p.transpose();
  A.bottomRows(1).setOnes();
  Vector b = Vector::Zero(K + 1);
  b(K) = 1.0;

  Eigen::ColPivHouseholderQR<Matrix> qr(A.topRows(K));
  qr.setThreshold(1e-10);
  const int deficiency = K - static_cast<int>(qr.rank());

  Eigen::ColPivHouseholderQR<Matrix> full(A);
  StationaryResult res;
  res.pi = full.solve(b);
  res.unique = (deficiency <= 1);

  const double resid = ((res.pi.transpose() * p).transpose() - res.pi).lpNorm<Eigen::Infinity>();
  if (resid > 1e-8 || std::abs(res.pi.sum() - 1.0) > 1e-8)
    throw std::runtime_error("stationary_distribution: linear solve failed to produce a fixed point");
  // clip solver noise
  for (int i = 0; i < K; ++i) res.pi(i) = std::max(res.pi(i), 0.0);
  res.pi /= res.pi.sum();
  return res;
}

// ---------------------------------------------------------------------------
// Text format: optional "K=<int>" header line, then whitespace-separated
// 1-based state indices.
// ---------------------------------------------------------------------------

inline StateSequence parse_sequence(std::istream& in, const std::string& origin = "<stream>") {
  StateSequence seq;
  std::string line;
  int lineno = 0;
  int K = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      if (header_allowed && tok.rfind("K=", 0) == 0) {
        try {
          K = std::stoi(tok.substr(2));
        } catch (const std::exception&) {
          throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": malformed K= header");
        }
        header_allowed = false;
        continue;
      }
      header_allowed = false;
      int v;
      try {
        std::size_t pos = 0;
        v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": expected integer state, got '" + tok + "'");
      }
      if (v < 1)
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": states are 1-based");
      seq.states.push_back(v);
    }
  }
  if (seq.states.empty()) throw std::invalid_argument(origin + ": empty sequence");
  const int maxs = *std::max_element(seq.states.begin(), seq.states.end());
  seq.num_states = K > 0 ? K : maxs;
  if (maxs > seq.num_states)
    throw std::invalid_argument(origin + ": state exceeds declared K");
  return seq;
}

inline StateSequence read_sequence_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open sequence file: " + path);
  return parse_sequence(in, path);
}

inline void write_sequence_file(const std::string& path, const StateSequence& seq) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << "K=" << seq.num_states << "\n";
  for (std::size_t i = 0; i < seq.states.size(); ++i)
    out << seq.states[i] << (i + 1 == seq.states.size() ? "\n" : " ");
}

}  // namespace mdpde
