#pragma once

#include <json.hpp>

#include "mdpde/asymptotics.hpp"
#include "mdpde/dpd.hpp"
#include "mdpde/hypothesis.hpp"

namespace mdpde {

using Json = nlohmann::ordered_json;

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Json to_json(const DpdEstimate& est) {
  Json j;
  j["theta_hat"] = to_json(est.theta_hat);
  j["alpha"] = est.alpha;
  j["objective_value"] = est.objective_value;
  j["residual_norm"] = est.residual_norm;
  j["iterations"] = est.iterations;
  j["converged"] = est.converged;
  j["at_boundary"] = est.at_boundary;
  j["off_support_cells"] = est.off_support_cells;
  return j;
}

inline Json to_json(const AsymptoticReport& rep, bool full_matrices = false) {
  Json j;
  j["mode"] = rep.mode == VarianceMode::ModelSpecific ? "model-specific" : "model-robust";
  j["sigma"] = to_json(rep.sigma);
  j["psi"] = to_json(rep.psi);
  j["omega"] = to_json(rep.omega);
  if (rep.se.size() > 0) j["se"] = to_json(rep.se);
  j["psi_condition"] = rep.psi_condition;
  j["near_singular"] = rep.near_singular;
  if (full_matrices) {
    j["lambda"] = to_json(rep.lambda);
    j["b_alpha_diag"] = to_json(rep.b_alpha_diag);
  }
  return j;
}

inline Json to_json(const std::vector<ConfidenceInterval>& cis, double level) {
  Json arr = Json::array();
  for (const auto& ci : cis) {
    Json j;
    j["lower"] = ci.lower;
    j["upper"] = ci.upper;
    arr.push_back(std::move(j));
  }
  Json out;
  out["level"] = level;
  out["intervals"] = std::move(arr);
  return out;
}

inline Json to_json(const WaldResult& w) {
  Json j;
  j["statistic"] = w.statistic;
  j["df"] = w.df;
  j["p_value"] = w.p_value;
  j["alpha"] = w.alpha_tuning;
  Json rej;
  for (const auto& [lvl, dec] : w.reject_at) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", lvl);
    rej[key] = dec;
  }
  j["reject_at"] = std::move(rej);
  if (w.noncentrality) j["noncentrality"] = *w.noncentrality;
  return j;
}

inline Json to_json(const InfluenceReport& rep) {
  Json j;
  Json t = Json::array();
  for (int ti : rep.t) t.push_back(ti + 1);  // report 1-based states
  j["t"] = std::move(t);
  j["if_vector"] = to_json(rep.if_vector);
  j["sensitivity"] = rep.sensitivity;
  switch (rep.method) {
    case InfluenceReport::Method::Exhaustive: j["sensitivity_method"] = "exhaustive"; break;
    case InfluenceReport::Method::PerRowExtremes: j["sensitivity_method"] = "per-row-heuristic"; break;
    case InfluenceReport::Method::CoordinateAscent: j["sensitivity_method"] = "per-row-heuristic"; break;
  }
  return j;
}

}  // namespace mdpde
