#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpde/dpd.hpp"
#include "mdpde/families.hpp"

namespace mdpde {

/// One clubbed transition row: percentages of entities that downgraded,
/// upgraded or stayed at the rating over a year.
struct CreditRow {
  std::string market;
  std::string state;
  double down_pct = 0.0;    // 0 stands for a blank (--) cell
  double up_pct = 0.0;
  double steady_pct = 0.0;
  bool fitted = false;      // AAA and D rows are echoed but never fitted
};

struct CreditDataset {
  std::vector<CreditRow> rows;
};

/// 2018 one-year corporate transition rates (down/up/steady, %) for the
/// three international markets; AAA has no upgrade cell and D is absorbing.
inline CreditDataset packaged_credit_dataset() {
  static const std::array<const char*, 3> markets = {"USA", "Europe", "EmergingMarkets"};
  static const std::array<const char*, 7> states = {"AAA", "AA", "A", "BBB", "BB", "B", "CCC/C"};
  // per market: {down, up, steady} x 7
  static const double table[3][7][3] = {
      {{9.79, 0.0, 90.21},
       {8.61, 0.53, 90.86},
       {6.22, 1.84, 91.94},
       {4.82, 3.83, 91.34},
       {9.66, 5.58, 84.76},
       {9.28, 5.48, 85.24},
       {33.71, 15.11, 51.18}},
      {{12.73, 0.0, 87.27},
       {11.00, 0.28, 88.72},
       {6.33, 1.94, 91.73},
       {4.32, 4.73, 90.95},
       {8.76, 6.25, 84.99},
       {7.47, 7.30, 85.23},
       {31.42, 17.63, 50.95}},
      {{9.63, 0.0, 90.37},
       {8.61, 1.16, 90.24},
       {5.44, 1.75, 92.81},
       {5.64, 2.56, 91.80},
       {6.69, 4.81, 88.50},
       {7.81, 7.15, 85.04},
       {22.41, 23.16, 54.43}}};
  CreditDataset ds;
  for (int m = 0; m < 3; ++m)
    for (int s = 0; s < 7; ++s)
      ds.rows.push_back({markets[static_cast<std::size_t>(m)], states[static_cast<std::size_t>(s)],
                         table[m][s][0], table[m][s][1], table[m][s][2], s >= 1});
  return ds;
}

/// CSV columns: market,state,down,up,steady (percentages; blank or -- for a
/// missing upgrade cell).
inline CreditDataset read_credit_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open credit CSV: " + path);
  CreditDataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> f;
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (lineno == 1 && !f.empty() && f[0] == "market") continue;  // header
    if (f.size() != 5)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected 5 columns");
    const auto num = [&](const std::string& s) {
      if (s.empty() || s == "--" || s == "-") return 0.0;
      try {
        return std::stod(s);
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
      }
    };
    CreditRow row;
    row.market = f[0];
    row.state = f[1];
    row.down_pct = num(f[2]);
    row.up_pct = num(f[3]);
    row.steady_pct = num(f[4]);
    row.fitted = row.state != "AAA" && row.state != "D";
    ds.rows.push_back(std::move(row));
  }
  if (ds.rows.empty()) throw std::invalid_argument(path + ": no data rows");
  return ds;
}

struct CreditFit {
  CreditRow row;
  double theta = 0.0;         // NaN-free only when row.fitted
  double upgrade_pct = 0.0;   // 100 (1-theta)^2
  double downgrade_pct = 0.0; // 100 * 2 theta (1-theta)
};

/// Fits the clubbed three-outcome model to one row at the given alpha. The
/// percentages are renormalized to proportions summing to exactly one before
/// fitting (the source table carries two-decimal rounding).
inline CreditFit fit_credit_row(const CreditRow& row, double alpha, const DpdConfig& cfg = {}) {
  const double total = row.down_pct + row.up_pct + row.steady_pct;
  if (std::abs(total - 100.0) > 0.5)
    throw std::invalid_argument("credit row " + row.market + "/" + row.state +
                                " does not sum to ~100% (" + std::to_string(total) + ")");
  CreditFit fit;
  fit.row = row;
  if (!row.fitted) return fit;

  static const CreditClubbed family;
  // observed clubbed row on the family's cells (up, steady, down); all
  // interior rows share the same per-row model, so fit against the AA row
  Vector obs = Vector::Zero(family.num_states());
  obs(0) = row.up_pct / total;
  obs(1) = row.steady_pct / total;
  obs(2) = row.down_pct / total;
  DpdConfig c = cfg;
  c.alpha = alpha;
  fit.theta = estimate_per_row(family, obs, 1, alpha, c);
  fit.upgrade_pct = 100.0 * (1.0 - fit.theta) * (1.0 - fit.theta);
  fit.downgrade_pct = 100.0 * 2.0 * fit.theta * (1.0 - fit.theta);
  return fit;
}

/// Closed-form MLE for a row, theta = (2 steady + down) / (2 total).
inline double credit_row_mle(const CreditRow& row) {
  const double total = row.down_pct + row.up_pct + row.steady_pct;
  return (2.0 * row.steady_pct + row.down_pct) / (2.0 * total);
}

}  // namespace mdpde
