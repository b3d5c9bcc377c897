#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpde/asymptotics.hpp"
#include "mdpde/chain.hpp"
#include "mdpde/dpd.hpp"

namespace mdpde {

struct SequenceBundle {
  std::vector<StateSequence> sequences;
  int num_states = 0;

  void validate() const {
    if (sequences.empty()) throw std::invalid_argument("SequenceBundle: empty bundle");
    for (const auto& s : sequences) {
      s.validate();
      if (s.num_states != num_states)
        throw std::invalid_argument("SequenceBundle: sequences disagree on K");
    }
  }
};

/// Combined frequency counts over a bundle. The raw tallies are kept as exact
/// integers together with the sequence count; the 1/n averaging factor
/// cancels in every probability estimate.
struct PooledCounts {
  TransitionCounts sums;         // exact integer tallies over all sequences
  int n = 0;                     // number of sequences
  std::int64_t effective_total;  // total transitions, drives sqrt(nT) scaling
};

inline PooledCounts pooled_counts(const SequenceBundle& bundle) {
  bundle.validate();
  const int K = bundle.num_states;
  PooledCounts out;
  out.n = static_cast<int>(bundle.sequences.size());
  out.sums.nu.setZero(K, K);
  for (const auto& seq : bundle.sequences) {
    if (seq.states.size() < 2) throw std::invalid_argument("pooled_counts: sequence without transitions");
    for (std::size_t t = 0; t + 1 < seq.states.size(); ++t)
      out.sums.nu(seq.states[t] - 1, seq.states[t + 1] - 1) += 1;
  }
  out.sums.nu_row = out.sums.nu.rowwise().sum();
  out.sums.total = out.sums.nu.sum();
  out.effective_total = out.sums.total;
  return out;
}

/// Point estimate from the pooled empirical matrix; the report's standard
/// errors use the combined transition count (sqrt(nT) asymptotics). Families
/// without a usable stationary law at the fitted model (absorbing chains)
/// fall back to the model-robust variance, recorded in the report's mode.
inline std::pair<DpdEstimate, AsymptoticReport> multi_sequence_estimate(
    const SequenceBundle& bundle, const ParametricFamily& fam, const DpdConfig& cfg,
    VarianceMode mode = VarianceMode::ModelSpecific) {
  const PooledCounts pooled = pooled_counts(bundle);
  const EmpiricalTransition emp = empirical_estimates(pooled.sums);
  DpdEstimate est = estimate(fam, emp, cfg);
  if (mode == VarianceMode::ModelSpecific) {
    try {
      AsymptoticReport rep = model_matrices(fam, est.theta_hat, cfg.alpha, pooled.effective_total);
      return {std::move(est), std::move(rep)};
    } catch (const std::runtime_error&) {
      // singular Psi under the model's own weights; use empirical weights
    }
  }
  AsymptoticReport rep = model_matrices(fam, est.theta_hat, emp.pi_hat, emp.pi_init_hat, cfg.alpha,
                                        pooled.effective_total);
  return {std::move(est), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Higher-order chains via state augmentation
// ---------------------------------------------------------------------------

struct HigherOrderSpec {
  int order = 1;
  int base_states = 0;

  std::int64_t augmented_states() const {
    std::int64_t n = 1;
    for (int r = 0; r < order; ++r) {
      n *= base_states;
      if (n > (std::int64_t{1} << 31))
        throw std::invalid_argument("HigherOrderSpec: K^r exceeds addressable range");
    }
    return n;
  }
};

/// Bijective row-major codec between r-tuples of 1-based states and single
/// 1-based indices over K^r.
struct AugmentCodec {
  int base_states = 0;
  int order = 1;

  int encode(const std::vector<int>& tuple) const {
    if (static_cast<int>(tuple.size()) != order)
      throw std::invalid_argument("AugmentCodec: tuple has wrong arity");
    std::int64_t code = 0;
    for (int m = 0; m < order; ++m) {
      const int s = tuple[static_cast<std::size_t>(m)];
      if (s < 1 || s > base_states) throw std::invalid_argument("AugmentCodec: state out of range");
      code = code * base_states + (s - 1);
    }
    return static_cast<int>(code + 1);
  }

  std::vector<int> decode(int code) const {
    std::vector<int> tuple(static_cast<std::size_t>(order));
    std::int64_t c = code - 1;
    for (int m = order - 1; m >= 0; --m) {
      tuple[static_cast<std::size_t>(m)] = static_cast<int>(c % base_states) + 1;
      c /= base_states;
    }
    return tuple;
  }
};

/// First-order representation of an order-r chain: state t of the output is
/// the encoded tuple (X_t, ..., X_{t+r-1}). Counting transitions of the
/// output reproduces the (r+1)-gram tallies of the input.
inline std::pair<StateSequence, AugmentCodec> augment_order(const StateSequence& seq, int order) {
  seq.validate();
  if (order < 1) throw std::invalid_argument("augment_order: order must be >= 1");
  if (static_cast<int>(seq.states.size()) < order + 1)
    throw std::invalid_argument("augment_order: sequence shorter than order + 1");
  HigherOrderSpec spec{order, seq.num_states};
  AugmentCodec codec{seq.num_states, order};
  StateSequence out;
  out.num_states = static_cast<int>(spec.augmented_states());
  const std::size_t n = seq.states.size() - static_cast<std::size_t>(order) + 1;
  out.states.resize(n);
  std::vector<int> window(static_cast<std::size_t>(order));
  for (std::size_t t = 0; t < n; ++t) {
    for (int m = 0; m < order; ++m) window[static_cast<std::size_t>(m)] = seq.states[t + static_cast<std::size_t>(m)];
    out.states[t] = codec.encode(window);
  }
  return {std::move(out), codec};
}

/// Order-r MDPDE as plain first-order estimation on the augmented chain.
/// The supplied family must live on the augmented space (support restricted
/// to the delta-consistent cells (i1..ir) -> (i2..ir, l)).
inline DpdEstimate higher_order_estimate(const StateSequence& seq, int order,
                                         const ParametricFamily& augmented_family,
                                         const DpdConfig& cfg) {
  const auto [aug, codec] = augment_order(seq, order);
  if (aug.num_states != augmented_family.num_states())
    throw std::invalid_argument("higher_order_estimate: family does not match augmented space");
  const EmpiricalTransition emp = empirical_estimates(count_transitions(aug));
  return estimate(augmented_family, emp, cfg);
}

/// Delta-embedding of a first-order family into the order-r representation:
/// p_{(i1..ir),(i2..ir,l)}(theta) = p_{ir,l}(theta). Fitting it through
/// higher_order_estimate weighs each transition by its length-r history,
/// which is the natural baseline when probing for higher-order structure.
class EmbeddedOrderFamily final : public ParametricFamily {
 public:
  EmbeddedOrderFamily(FamilyPtr base, int order)
      : base_(std::move(base)), order_(order), codec_{base_->num_states(), order} {
    if (order < 1) throw std::invalid_argument("EmbeddedOrderFamily: order must be >= 1");
    HigherOrderSpec spec{order, base_->num_states()};
    num_states_ = static_cast<int>(spec.augmented_states());
    const int K = base_->num_states();
    // histories in code order; successors follow the base support of the
    // history's final state
    std::vector<std::vector<std::pair<int, int>>> by_last(static_cast<std::size_t>(K));
    const auto& C = base_->support();
    for (std::size_t k = 0; k < C.size(); ++k)
      by_last[static_cast<std::size_t>(C[k].first)].emplace_back(C[k].second, static_cast<int>(k));
    for (int code = 1; code <= num_states_; ++code) {
      const std::vector<int> hist = codec_.decode(code);
      const int last = hist.back();
      std::vector<int> next(hist.begin() + 1, hist.end());
      next.push_back(0);
      for (const auto& [l, base_cell] : by_last[static_cast<std::size_t>(last - 1)]) {
        next.back() = l + 1;
        support_.emplace_back(code - 1, codec_.encode(next) - 1);
        base_cell_.push_back(base_cell);
      }
    }
  }

  std::string name() const override { return base_->name() + "^order" + std::to_string(order_); }
  int num_states() const override { return num_states_; }
  int dim() const override { return base_->dim(); }
  const std::vector<SupportCell>& support() const override { return support_; }
  Vector lower_bounds() const override { return base_->lower_bounds(); }
  Vector upper_bounds() const override { return base_->upper_bounds(); }
  bool separable() const override { return base_->separable(); }
  int row_coordinate(int row) const override {
    return base_->row_coordinate(codec_.decode(row + 1).back() - 1);
  }

  Matrix transition(const Vector& theta) const override {
    const Matrix P = base_->transition(theta);
    Matrix out = Matrix::Zero(num_states_, num_states_);
    for (std::size_t k = 0; k < support_.size(); ++k) {
      const auto& base_c = base_->support()[static_cast<std::size_t>(base_cell_[k])];
      out(support_[k].first, support_[k].second) = P(base_c.first, base_c.second);
    }
    return out;
  }

  Matrix jacobian(const Vector& theta) const override {
    const Matrix J = base_->jacobian(theta);
    Matrix out(static_cast<Eigen::Index>(support_.size()), dim());
    for (std::size_t k = 0; k < support_.size(); ++k)
      out.row(static_cast<Eigen::Index>(k)) = J.row(base_cell_[k]);
    return out;
  }

 private:
  FamilyPtr base_;
  int order_;
  AugmentCodec codec_;
  int num_states_ = 0;
  std::vector<SupportCell> support_;
  std::vector<int> base_cell_;
};

// ---------------------------------------------------------------------------
// Non-stationary chains: time-dependent transition probabilities
// ---------------------------------------------------------------------------

/// Model p(t; theta) for t = 0..horizon-1 (transition from X_t to X_{t+1}).
class TimeVaryingFamily {
 public:
  virtual ~TimeVaryingFamily() = default;
  virtual int num_states() const = 0;
  virtual int dim() const = 0;
  virtual int horizon() const = 0;
  virtual Vector lower_bounds() const { return Vector::Zero(dim()); }
  virtual Vector upper_bounds() const { return Vector::Ones(dim()); }
  virtual Matrix transition(int t, const Vector& theta) const = 0;

  Vector clamp_interior(const Vector& theta) const {
    Vector lo = lower_bounds(), hi = upper_bounds();
    Vector out = theta;
    for (int u = 0; u < dim(); ++u) {
      const double d = kInteriorClamp * std::max(1.0, hi(u) - lo(u));
      out(u) = std::min(std::max(out(u), lo(u) + d), hi(u) - d);
    }
    return out;
  }
};

/// Per-time-slice empirical estimates over a bundle of equal-length
/// sequences: counts of (X_{t} = i, X_{t+1} = j) across sequences.
struct TimeSliceEmpirical {
  // [t](i,j) counts; weight(t,i) = occupancy fraction of state i at time t
  std::vector<Matrix> pi_hat;
  std::vector<Vector> weight;
  int horizon = 0;
};

inline TimeSliceEmpirical time_slice_estimates(const SequenceBundle& bundle) {
  bundle.validate();
  const int K = bundle.num_states;
  const std::size_t len = bundle.sequences.front().states.size();
  for (const auto& s : bundle.sequences)
    if (s.states.size() != len)
      throw std::invalid_argument("time_slice_estimates: sequences must share a common length");
  if (len < 2) throw std::invalid_argument("time_slice_estimates: sequences have no transitions");
  const int horizon = static_cast<int>(len) - 1;
  const double n = static_cast<double>(bundle.sequences.size());

  TimeSliceEmpirical out;
  out.horizon = horizon;
  out.pi_hat.assign(static_cast<std::size_t>(horizon), Matrix::Zero(K, K));
  out.weight.assign(static_cast<std::size_t>(horizon), Vector::Zero(K));
  for (const auto& s : bundle.sequences)
    for (int t = 0; t < horizon; ++t)
      out.pi_hat[static_cast<std::size_t>(t)](s.states[static_cast<std::size_t>(t)] - 1,
                                              s.states[static_cast<std::size_t>(t) + 1] - 1) += 1.0;
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < K; ++i) {
      const double rowsum = out.pi_hat[static_cast<std::size_t>(t)].row(i).sum();
      out.weight[static_cast<std::size_t>(t)](i) = rowsum / n;
      if (rowsum > 0.0)
        out.pi_hat[static_cast<std::size_t>(t)].row(i) /= rowsum;
    }
  }
  return out;
}

/// H_{n,alpha}(theta): per-time analogue of the stationary objective. Cells
/// with zero visits at a given t carry zero weight.
inline double nonstationary_objective(const TimeSliceEmpirical& slices,
                                      const TimeVaryingFamily& fam, const Vector& theta,
                                      double alpha) {
  const int K = fam.num_states();
  if (slices.horizon > fam.horizon())
    throw std::invalid_argument("nonstationary_objective: data horizon exceeds the model's");
  double H = 0.0;
  for (int t = 0; t < slices.horizon; ++t) {
    const Matrix P = fam.transition(t, theta);
    const Matrix& g = slices.pi_hat[static_cast<std::size_t>(t)];
    const Vector& w = slices.weight[static_cast<std::size_t>(t)];
    for (int i = 0; i < K; ++i) {
      if (w(i) <= 0.0) continue;
      for (int j = 0; j < K; ++j) {
        const double p = P(i, j);
        if (alpha == 0.0) {
          if (g(i, j) > 0.0) H -= w(i) * g(i, j) * std::log(std::max(p, 1e-300));
        } else if (p > 0.0 || g(i, j) > 0.0) {
          H += w(i) *
               (std::pow(p, 1.0 + alpha) - (1.0 + 1.0 / alpha) * std::pow(p, alpha) * g(i, j)) /
               (1.0 + alpha);
        }
      }
    }
  }
  return H;
}

inline double nonstationary_objective(const SequenceBundle& bundle, const TimeVaryingFamily& fam,
                                      const Vector& theta, double alpha) {
  return nonstationary_objective(time_slice_estimates(bundle), fam, theta, alpha);
}

/// Point estimate for the non-stationary model: multistart projected Newton
/// on the finite-difference gradient of the objective. Only the point
/// estimate is provided; no asymptotics.
inline DpdEstimate nonstationary_estimate(const SequenceBundle& bundle,
                                          const TimeVaryingFamily& fam, const DpdConfig& cfg) {
  const TimeSliceEmpirical slices = time_slice_estimates(bundle);
  const int d = fam.dim();
  const Vector lo = fam.lower_bounds(), hi = fam.upper_bounds();
  const auto H = [&](const Vector& th) { return nonstationary_objective(slices, fam, th, cfg.alpha); };
  const auto grad = [&](const Vector& th) {
    Vector g(d);
    for (int u = 0; u < d; ++u) {
      const double h = 1e-6 * std::max(1.0, std::abs(th(u)));
      Vector tp = th, tm = th;
      tp(u) = std::min(tp(u) + h, hi(u));
      tm(u) = std::max(tm(u) - h, lo(u));
      g(u) = (H(tp) - H(tm)) / (tp(u) - tm(u));
    }
    return g;
  };

  int per_dim = cfg.multistart;
  while (std::pow(per_dim, d) > 128.0 && per_dim > 2) --per_dim;
  DpdEstimate out;
  out.alpha = cfg.alpha;
  out.at_boundary.assign(static_cast<std::size_t>(d), false);
  double best = std::numeric_limits<double>::infinity();

  std::vector<int> digits(static_cast<std::size_t>(d), 0);
  for (;;) {
    Vector th(d);
    for (int u = 0; u < d; ++u)
      th(u) = lo(u) + (digits[static_cast<std::size_t>(u)] + 0.5) * (hi(u) - lo(u)) / per_dim;
    int iters = 0;
    bool conv = false;
    for (; iters < cfg.max_iter; ++iters) {
      const Vector g = grad(th);
      if (g.lpNorm<Eigen::Infinity>() <= cfg.tol_grad) { conv = true; break; }
      Matrix Hess(d, d);
      for (int u = 0; u < d; ++u) {
        const double h = 1e-4 * std::max(1.0, std::abs(th(u)));
        Vector tp = th, tm = th;
        tp(u) = std::min(tp(u) + h, hi(u));
        tm(u) = std::max(tm(u) - h, lo(u));
        Hess.col(u) = (grad(tp) - grad(tm)) / (tp(u) - tm(u));
      }
      Vector step = Hess.fullPivLu().isInvertible() ? Vector(-Hess.fullPivLu().solve(g)) : Vector(-g);
      if (g.dot(step) >= 0.0) step = -g;  // keep it a descent direction
      const double H0 = H(th);
      double lambda = 1.0;
      Vector cand = th;
      for (int bt = 0; bt < 40; ++bt) {
        cand = fam.clamp_interior(th + lambda * step);
        if (H(cand) <= H0 + 1e-4 * lambda * g.dot(step)) break;
        lambda *= 0.5;
      }
      const double moved = (cand - th).lpNorm<Eigen::Infinity>();
      th = cand;
      if (moved <= cfg.tol_step) { conv = true; break; }
    }
    const double obj = H(th);
    if (obj < best - 1e-14) {
      best = obj;
      out.theta_hat = th;
      out.objective_value = obj;
      out.iterations = iters;
      out.converged = conv;
      out.residual_norm = grad(th).lpNorm<Eigen::Infinity>();
    }
    int carry = 0;
    while (carry < d && ++digits[static_cast<std::size_t>(carry)] == per_dim)
      digits[static_cast<std::size_t>(carry++)] = 0;
    if (carry == d) break;
  }
  for (int u = 0; u < d; ++u) {
    const double pad = 2.0 * kInteriorClamp * std::max(1.0, hi(u) - lo(u));
    out.at_boundary[static_cast<std::size_t>(u)] =
        out.theta_hat(u) <= lo(u) + pad || out.theta_hat(u) >= hi(u) - pad;
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Bundle text format: one sequence per line; an optional leading "K=<int>"
/// line applies to the whole file.
inline SequenceBundle read_bundle_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open bundle file: " + path);
  SequenceBundle bundle;
  std::string line;
  int lineno = 0;
  int K = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    std::vector<int> states;
    while (ls >> tok) {
      if (bundle.sequences.empty() && states.empty() && K == 0 && tok.rfind("K=", 0) == 0) {
        K = std::stoi(tok.substr(2));
        continue;
      }
      try {
        states.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected integer state, got '" + tok + "'");
      }
    }
    if (states.empty()) continue;
    StateSequence s;
    s.states = std::move(states);
    s.num_states = 0;  // filled below
    bundle.sequences.push_back(std::move(s));
  }
  if (bundle.sequences.empty()) throw std::invalid_argument(path + ": no sequences");
  int maxs = 0;
  for (const auto& s : bundle.sequences)
    for (int v : s.states) maxs = std::max(maxs, v);
  bundle.num_states = K > 0 ? K : maxs;
  if (maxs > bundle.num_states) throw std::invalid_argument(path + ": state exceeds declared K");
  for (auto& s : bundle.sequences) s.num_states = bundle.num_states;
  return bundle;
}

}  // namespace mdpde
