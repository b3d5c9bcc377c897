// Command-line front end: estimation, testing, influence analysis and the
// table/experiment pipelines. Exit codes: 0 success, 1 input error, 2 fit
// did not converge.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdpde/are_table.hpp"
#include "mdpde/asymptotics.hpp"
#include "mdpde/chain.hpp"
#include "mdpde/credit.hpp"
#include "mdpde/dpd.hpp"
#include "mdpde/experiments.hpp"
#include "mdpde/extensions.hpp"
#include "mdpde/families.hpp"
#include "mdpde/hypothesis.hpp"
#include "mdpde/json_out.hpp"

namespace {

using mdpde::Json;
using mdpde::Matrix;
using mdpde::Vector;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitNoConvergence = 2;

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw std::invalid_argument("empty numeric list");
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << text;
}

void emit_json(const Json& j, const std::string& path) { emit(j.dump(2) + "\n", path); }

struct CommonOpts {
  std::string family = "binomial-walk";
  int K = 0;  // 0: infer from the data where possible
  std::string alpha = "0.5";
  std::uint64_t seed = 1;
  std::string input, input2, output;
  std::string format = "json";
  double level = 0.95;
};

// the greenwood parameter K means states 0..K, i.e. K+1 chain states
int infer_family_k(const std::string& family, int num_states) {
  return family == "greenwood" ? num_states - 1 : num_states;
}

mdpde::FamilyPtr family_of(const CommonOpts& o) {
  if (o.K == 0) throw std::invalid_argument("--K is required for this command");
  return mdpde::make_family(o.family, o.K);
}

// estimate + model-specific/robust report + CI for one alpha; families whose
// fitted model has no informative stationary law (absorbing chains) fall
// back to the model-robust variance, visible through the report's mode
Json estimate_block(const mdpde::ParametricFamily& fam, const mdpde::EmpiricalTransition& emp,
                    std::int64_t T, double alpha, double level, bool robust_variance,
                    bool* converged) {
  mdpde::DpdConfig cfg;
  cfg.alpha = alpha;
  const mdpde::DpdEstimate est = mdpde::estimate(fam, emp, cfg);
  *converged = est.converged;
  std::optional<mdpde::AsymptoticReport> rep;
  if (!robust_variance) {
    try {
      rep = mdpde::model_matrices(fam, est.theta_hat, alpha, T);
    } catch (const std::runtime_error&) {
    }
  }
  if (!rep)
    rep = mdpde::model_matrices(fam, est.theta_hat, emp.pi_hat, emp.pi_init_hat, alpha, T);
  const auto cis = mdpde::confidence_intervals(est.theta_hat, *rep, level);
  Json j;
  j["estimate"] = mdpde::to_json(est);
  j["asymptotics"] = mdpde::to_json(*rep);
  j["confidence"] = mdpde::to_json(cis, level);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust inference for finite Markov chains via minimum density power divergence"};
  app.require_subcommand(1);

  CommonOpts o;
  // shared options are registered per subcommand that uses them

  // ---- simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "simulate a chain from a parametric family");
  std::string sim_theta = "0.25";
  std::int64_t sim_steps = 1000;
  int sim_x0 = 1;
  double sim_eps = 0.0;
  std::string sim_scheme = "replace-forward";
  int sim_target = 1;
  sim->add_option("--family", o.family);
  sim->add_option("--K", o.K);
  sim->add_option("--theta", sim_theta, "comma-separated parameter vector");
  sim->add_option("--steps", sim_steps);
  sim->add_option("--x0", sim_x0, "initial state (1-based)");
  sim->add_option("--seed", o.seed);
  sim->add_option("--epsilon", sim_eps, "contamination proportion");
  sim->add_option("--scheme", sim_scheme, "replace-forward or absorb");
  sim->add_option("--target", sim_target, "absorb target state (1-based)");
  sim->add_option("--output", o.output);

  // ---- estimate -----------------------------------------------------------
  auto* est = app.add_subcommand("estimate", "fit the MDPDE to an observed sequence");
  bool est_robust = false;
  bool est_bundle = false;
  int est_order = 1;
  est->add_option("--family", o.family);
  est->add_option("--K", o.K);
  est->add_option("--alpha", o.alpha, "comma-separated alpha grid");
  est->add_option("--input", o.input)->required();
  est->add_option("--output", o.output);
  est->add_option("--format", o.format, "json or csv");
  est->add_option("--level", o.level, "confidence level");
  est->add_option("--order", est_order, "chain order (r > 1 augments the state space)");
  est->add_flag("--robust-variance", est_robust, "use the model-robust variance estimator");
  est->add_flag("--bundle", est_bundle, "input holds one sequence per line (pooled fit)");

  // ---- wald ---------------------------------------------------------------
  auto* wald = app.add_subcommand("wald", "Wald-type test of a parametric null");
  std::string wald_theta0;
  bool wald_bl = false;
  wald->add_option("--family", o.family);
  wald->add_option("--K", o.K);
  wald->add_option("--alpha", o.alpha);
  wald->add_option("--input", o.input)->required();
  wald->add_option("--theta0", wald_theta0, "simple null theta = theta0 (comma list)");
  wald->add_flag("--bernoulli-laplace", wald_bl,
                 "test the Bernoulli-Laplace null within the state-dependent walk family");
  wald->add_option("--level", o.level);
  wald->add_option("--output", o.output);

  // ---- two-sample ---------------------------------------------------------
  auto* twos = app.add_subcommand("two-sample", "similarity test for two observed sequences");
  twos->add_option("--family", o.family);
  twos->add_option("--K", o.K);
  twos->add_option("--alpha", o.alpha);
  twos->add_option("--input", o.input)->required();
  twos->add_option("--input2", o.input2)->required();
  twos->add_option("--output", o.output);

  // ---- influence ----------------------------------------------------------
  auto* infl = app.add_subcommand("influence", "influence function and sensitivity at the model");
  std::string infl_theta = "0.25";
  std::string infl_t;
  infl->add_option("--family", o.family);
  infl->add_option("--K", o.K);
  infl->add_option("--theta", infl_theta);
  infl->add_option("--alpha", o.alpha);
  infl->add_option("--t", infl_t, "contamination map (comma list of 1-based states)");
  infl->add_option("--output", o.output);

  // ---- are-table ----------------------------------------------------------
  auto* aret = app.add_subcommand("are-table", "asymptotic relative efficiency table (CSV)");
  aret->add_option("--output", o.output);

  // ---- mse-experiment -----------------------------------------------------
  auto* mse = app.add_subcommand("mse-experiment", "empirical MSE grid under contamination (CSV)");
  mdpde::MseExperimentConfig mcfg;
  std::string mse_alphas, mse_epsilons, mse_lengths;
  mse->add_option("--family", mcfg.family, "binomial-walk or greenwood");
  mse->add_option("--K", mcfg.K);
  mse->add_option("--theta", mcfg.theta);
  mse->add_option("--replicates", mcfg.replicates);
  mse->add_option("--seed", mcfg.seed);
  mse->add_option("--alphas", mse_alphas, "override alpha grid (comma list)");
  mse->add_option("--epsilons", mse_epsilons, "override epsilon grid");
  mse->add_option("--lengths", mse_lengths, "override sequence lengths");
  mse->add_option("--output", o.output);

  // ---- credit -------------------------------------------------------------
  auto* credit = app.add_subcommand("credit", "fit the clubbed credit-migration model");
  bool packaged = false;
  credit->add_flag("--packaged-credit", packaged, "use the packaged 2018 migration dataset");
  credit->add_option("--input", o.input, "credit CSV (market,state,down,up,steady)");
  credit->add_option("--alpha", o.alpha);
  credit->add_option("--format", o.format, "json or csv");
  credit->add_option("--output", o.output);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto fam = family_of(o);
      const Vector theta = to_vector(parse_list(sim_theta));
      mdpde::StateSequence seq =
          mdpde::simulate_chain(fam->transition(theta), sim_x0, sim_steps, o.seed);
      if (sim_eps > 0.0) {
        mdpde::ContaminationSpec spec;
        spec.epsilon = sim_eps;
        spec.scheme = sim_scheme == "absorb" ? mdpde::ContaminationScheme::AbsorbToState
                                             : mdpde::ContaminationScheme::ReplaceForward;
        spec.target_state = sim_target;
        spec.seed = mdpde::derive_seed(o.seed, 1);
        seq = mdpde::contaminate(seq, spec);
      }
      std::ostringstream os;
      os << "K=" << seq.num_states << "\n";
      for (std::size_t i = 0; i < seq.states.size(); ++i)
        os << seq.states[i] << (i + 1 == seq.states.size() ? "\n" : " ");
      emit(os.str(), o.output);
      return kExitOk;
    }

    if (est->parsed()) {
      const auto alphas = parse_list(o.alpha);
      Json out;
      out["command"] = "estimate";
      out["family"] = o.family;
      bool all_converged = true;

      if (est_bundle) {
        mdpde::SequenceBundle bundle = mdpde::read_bundle_file(o.input);
        if (o.K == 0) o.K = infer_family_k(o.family, bundle.num_states);
        const auto fam = mdpde::make_family(o.family, o.K);
        if (bundle.num_states > fam->num_states())
          throw std::invalid_argument("bundle states exceed the family's K");
        bundle.num_states = fam->num_states();
        for (auto& s : bundle.sequences) s.num_states = bundle.num_states;
        out["K"] = bundle.num_states;
        out["sequences"] = bundle.sequences.size();
        Json fits = Json::array();
        for (double a : alphas) {
          mdpde::DpdConfig cfg;
          cfg.alpha = a;
          auto [e, rep] = mdpde::multi_sequence_estimate(bundle, *fam, cfg);
          all_converged = all_converged && e.converged;
          Json j;
          j["estimate"] = mdpde::to_json(e);
          j["asymptotics"] = mdpde::to_json(rep);
          j["confidence"] =
              mdpde::to_json(mdpde::confidence_intervals(e.theta_hat, rep, o.level), o.level);
          fits.push_back(std::move(j));
        }
        out["fits"] = std::move(fits);
        emit_json(out, o.output);
        return all_converged ? kExitOk : kExitNoConvergence;
      }

      mdpde::StateSequence seq = mdpde::read_sequence_file(o.input);
      if (o.K == 0) o.K = infer_family_k(o.family, seq.num_states);
      mdpde::FamilyPtr fam = mdpde::make_family(o.family, o.K);
      if (seq.num_states > fam->num_states())
        throw std::invalid_argument("sequence K=" + std::to_string(seq.num_states) +
                                    " does not match family with " +
                                    std::to_string(fam->num_states()) + " states");
      seq.num_states = fam->num_states();
      out["K"] = seq.num_states;
      if (est_order > 1) {
        // delta-embed the family and fit on the order-r representation
        fam = std::make_shared<mdpde::EmbeddedOrderFamily>(fam, est_order);
        auto [aug, codec] = mdpde::augment_order(seq, est_order);
        seq = std::move(aug);
        out["order"] = est_order;
      }
      const auto counts = mdpde::count_transitions(seq);
      const auto emp = mdpde::empirical_estimates(counts);
      out["T"] = counts.total;
      if (auto mle = fam->closed_form_mle(counts)) out["closed_form_mle"] = mdpde::to_json(*mle);
      Json fits = Json::array();
      for (double a : alphas) {
        bool conv = false;
        fits.push_back(estimate_block(*fam, emp, counts.total, a, o.level, est_robust, &conv));
        all_converged = all_converged && conv;
      }
      out["fits"] = std::move(fits);
      if (o.format == "csv") {
        std::ostringstream os;
        os << "alpha,coordinate,theta,se,ci_lower,ci_upper\n";
        for (const auto& fit : out["fits"]) {
          const auto& th = fit["estimate"]["theta_hat"];
          for (std::size_t u = 0; u < th.size(); ++u) {
            char line[200];
            std::snprintf(line, sizeof line, "%g,%zu,%.10f,%.10f,%.10f,%.10f\n",
                          fit["estimate"]["alpha"].get<double>(), u, th[u].get<double>(),
                          fit["asymptotics"]["se"][u].get<double>(),
                          fit["confidence"]["intervals"][u]["lower"].get<double>(),
                          fit["confidence"]["intervals"][u]["upper"].get<double>());
            os << line;
          }
        }
        emit(os.str(), o.output);
      } else {
        emit_json(out, o.output);
      }
      return all_converged ? kExitOk : kExitNoConvergence;
    }

    if (wald->parsed()) {
      const double a = parse_list(o.alpha).front();
      const mdpde::StateSequence seq = mdpde::read_sequence_file(o.input);
      if (o.K == 0) o.K = infer_family_k(o.family, seq.num_states);
      const auto fam = mdpde::make_family(o.family, o.K);
      if (seq.num_states > fam->num_states())
        throw std::invalid_argument("sequence uses more states than the family");
      mdpde::StateSequence fixed = seq;
      fixed.num_states = fam->num_states();
      const auto counts = mdpde::count_transitions(fixed);
      const auto emp = mdpde::empirical_estimates(counts);
      mdpde::DpdConfig cfg;
      cfg.alpha = a;
      const mdpde::DpdEstimate e = mdpde::estimate(*fam, emp, cfg);
      Json out;
      out["command"] = "wald";
      out["family"] = o.family;
      out["T"] = counts.total;
      out["estimate"] = mdpde::to_json(e);
      mdpde::WaldResult w;
      if (wald_bl) {
        if (o.family != "multi-binomial-walk")
          throw std::invalid_argument("--bernoulli-laplace requires --family multi-binomial-walk");
        w = mdpde::wald_bernoulli_laplace(e.theta_hat, counts.total, o.K, a);
      } else {
        if (wald_theta0.empty()) throw std::invalid_argument("wald: provide --theta0 or --bernoulli-laplace");
        const Vector theta0 = to_vector(parse_list(wald_theta0));
        if (theta0.size() != e.theta_hat.size())
          throw std::invalid_argument("theta0 has wrong dimension");
        const auto rep = mdpde::model_matrices(*fam, e.theta_hat, a);
        w = mdpde::wald_composite(e, rep, mdpde::simple_constraint(theta0), counts.total);
      }
      out["test"] = mdpde::to_json(w);
      emit_json(out, o.output);
      return e.converged ? kExitOk : kExitNoConvergence;
    }

    if (twos->parsed()) {
      const double a = parse_list(o.alpha).front();
      mdpde::StateSequence raw1 = mdpde::read_sequence_file(o.input);
      mdpde::StateSequence raw2 = mdpde::read_sequence_file(o.input2);
      if (o.K == 0)
        o.K = infer_family_k(o.family, std::max(raw1.num_states, raw2.num_states));
      const auto fam = mdpde::make_family(o.family, o.K);
      mdpde::DpdConfig cfg;
      cfg.alpha = a;
      auto load = [&](mdpde::StateSequence s, const std::string& path) {
        if (s.num_states > fam->num_states())
          throw std::invalid_argument(path + ": more states than the family");
        s.num_states = fam->num_states();
        return s;
      };
      const auto s1 = load(raw1, o.input), s2 = load(raw2, o.input2);
      const auto c1 = mdpde::count_transitions(s1), c2 = mdpde::count_transitions(s2);
      const auto e1 = mdpde::estimate(*fam, mdpde::empirical_estimates(c1), cfg);
      const auto e2 = mdpde::estimate(*fam, mdpde::empirical_estimates(c2), cfg);
      const auto r1 = mdpde::model_matrices(*fam, e1.theta_hat, a);
      const auto r2 = mdpde::model_matrices(*fam, e2.theta_hat, a);
      const auto w = mdpde::two_sample(e1, e2, r1, r2, c1.total, c2.total);
      Json out;
      out["command"] = "two-sample";
      out["family"] = o.family;
      out["estimate_1"] = mdpde::to_json(e1);
      out["estimate_2"] = mdpde::to_json(e2);
      out["test"] = mdpde::to_json(w);
      emit_json(out, o.output);
      return (e1.converged && e2.converged) ? kExitOk : kExitNoConvergence;
    }

    if (infl->parsed()) {
      const auto fam = family_of(o);
      const Vector theta = to_vector(parse_list(infl_theta));
      const auto alphas = parse_list(o.alpha);
      const Matrix P = fam->transition(theta);
      Vector pio;
      if (auto cs = fam->stationary(theta))
        pio = *cs;
      else
        pio = mdpde::stationary_distribution(P).pi;
      Json out;
      out["command"] = "influence";
      out["family"] = o.family;
      out["theta"] = mdpde::to_json(theta);
      Json blocks = Json::array();
      for (double a : alphas) {
        Json j;
        j["alpha"] = a;
        if (!infl_t.empty()) {
          const auto tv = parse_list(infl_t);
          std::vector<int> t(tv.size());
          for (std::size_t i = 0; i < tv.size(); ++i) t[i] = static_cast<int>(tv[i]) - 1;
          j["if_vector"] = mdpde::to_json(mdpde::influence_function(*fam, theta, P, pio, t, a));
        }
        j["report"] = mdpde::to_json(mdpde::sensitivity(*fam, theta, P, pio, a));
        blocks.push_back(std::move(j));
      }
      out["alphas"] = std::move(blocks);
      emit_json(out, o.output);
      return kExitOk;
    }

    if (aret->parsed()) {
      emit(mdpde::are_table_csv(), o.output);
      return kExitOk;
    }

    if (mse->parsed()) {
      if (!mse_alphas.empty()) mcfg.alphas = parse_list(mse_alphas);
      if (!mse_epsilons.empty()) mcfg.epsilons = parse_list(mse_epsilons);
      if (!mse_lengths.empty()) {
        mcfg.lengths.clear();
        for (double v : parse_list(mse_lengths)) mcfg.lengths.push_back(static_cast<std::int64_t>(v));
      }
      const auto rows = mdpde::mse_experiment(mcfg);
      std::ostringstream os;
      os << "family,alpha,epsilon,T,mse\n";
      for (const auto& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%s,%.2f,%.2f,%lld,%.8f\n", r.family.c_str(), r.alpha,
                      r.epsilon, static_cast<long long>(r.T), r.mse);
        os << line;
      }
      emit(os.str(), o.output);
      return kExitOk;
    }

    if (credit->parsed()) {
      const auto alphas = parse_list(o.alpha);
      const mdpde::CreditDataset ds =
          packaged ? mdpde::packaged_credit_dataset() : mdpde::read_credit_csv(o.input);
      if (!packaged && o.input.empty())
        throw std::invalid_argument("credit: provide --input or --packaged-credit");
      if (o.format == "csv") {
        std::ostringstream os;
        os << "market,state,alpha,theta,upgrade_pct,downgrade_pct\n";
        for (const auto& row : ds.rows) {
          // alpha = -1 row carries the closed-form MLE
          if (row.fitted) {
            const double mle = mdpde::credit_row_mle(row);
            char line[200];
            std::snprintf(line, sizeof line, "%s,%s,mle,%.4f,%.2f,%.2f\n", row.market.c_str(),
                          row.state.c_str(), mle, 100.0 * (1 - mle) * (1 - mle),
                          100.0 * 2 * mle * (1 - mle));
            os << line;
            for (double a : alphas) {
              const auto fit = mdpde::fit_credit_row(row, a);
              std::snprintf(line, sizeof line, "%s,%s,%.2f,%.4f,%.2f,%.2f\n", row.market.c_str(),
                            row.state.c_str(), a, fit.theta, fit.upgrade_pct, fit.downgrade_pct);
              os << line;
            }
          } else {
            char line[200];
            std::snprintf(line, sizeof line, "%s,%s,,,,\n", row.market.c_str(), row.state.c_str());
            os << line;
          }
        }
        emit(os.str(), o.output);
      } else {
        Json out;
        out["command"] = "credit";
        Json rows = Json::array();
        for (const auto& row : ds.rows) {
          Json j;
          j["market"] = row.market;
          j["state"] = row.state;
          j["down_pct"] = row.down_pct;
          j["up_pct"] = row.up_pct;
          j["steady_pct"] = row.steady_pct;
          j["fitted"] = row.fitted;
          if (row.fitted) {
            j["mle"] = mdpde::credit_row_mle(row);
            Json fits = Json::array();
            for (double a : alphas) {
              const auto fit = mdpde::fit_credit_row(row, a);
              Json f;
              f["alpha"] = a;
              f["theta"] = fit.theta;
              f["upgrade_pct"] = fit.upgrade_pct;
              f["downgrade_pct"] = fit.downgrade_pct;
              fits.push_back(std::move(f));
            }
            j["fits"] = std::move(fits);
          }
          rows.push_back(std::move(j));
        }
        out["rows"] = std::move(rows);
        emit_json(out, o.output);
      }
      return kExitOk;
    }
  } catch (const mdpde::DataOutsideSupportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}
