#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "mdpde/asymptotics.hpp"

namespace mdpde {

inline const std::vector<double>& are_table_thetas() {
  static const std::vector<double> v = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  return v;
}

inline const std::vector<double>& are_table_alphas() {
  static const std::vector<double> v = {0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  return v;
}

/// One-decimal display value of an ARE cell. The reference table rounds in
/// two stages (to two decimals, then to one, half away from zero); both
/// stages are done in integer space so the result is exact. Returned as
/// tenths to keep formatting float-free.
inline std::int64_t are_cell_tenths(double theta, double alpha) {
  const double raw = are_example1(theta, alpha);
  const std::int64_t hundredths = std::llround(raw * 100.0);
  return (hundredths >= 0 ? hundredths + 5 : hundredths - 5) / 10;
}

inline std::string format_tenths(std::int64_t tenths) {
  std::ostringstream os;
  os << tenths / 10 << '.' << std::abs(tenths % 10);
  return os.str();
}

/// CSV with one row per theta and one column per alpha, matching the
/// reference efficiency table cell for cell.
inline std::string are_table_csv() {
  std::ostringstream os;
  os << "theta";
  for (double a : are_table_alphas()) {
    std::ostringstream col;
    col << a;
    os << ",are_alpha_" << col.str();
  }
  os << "\n";
  for (double th : are_table_thetas()) {
    std::ostringstream row;
    row << th;
    os << row.str();
    for (double a : are_table_alphas()) os << ',' << format_tenths(are_cell_tenths(th, a));
    os << "\n";
  }
  return os.str();
}

}  // namespace mdpde
