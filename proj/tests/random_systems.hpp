#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "offcut/constraints.hpp"

namespace offcut::testing {

struct RandomSystem {
  ConstraintSystem system;
  std::vector<double> x;
  std::vector<double> u;
};

/// Feasible sparse system: rows have 2-4 integer coefficients, X is random
/// and s = C X. Lengths get min bounds well below their values. `u` touches
/// 1-3 variables.
inline RandomSystem random_feasible_system(std::mt19937_64& rng, std::size_t max_vars, std::size_t max_rows) {
  std::uniform_int_distribution<std::size_t> nvars(3, max_vars);
  const std::size_t n = nvars(rng);
  std::uniform_int_distribution<std::size_t> nrows(1, std::min(max_rows, n - 1));
  const std::size_t m = nrows(rng);

  std::vector<VarKind> kinds(n);
  std::vector<double> mins(n);
  std::vector<double> x(n);
  std::bernoulli_distribution is_length(0.5);
  std::uniform_real_distribution<double> value(20.0, 400.0);
  for (std::size_t i = 0; i < n; ++i) {
    kinds[i] = is_length(rng) ? VarKind::Length : VarKind::Position;
    x[i] = value(rng);
    mins[i] = kinds[i] == VarKind::Length ? 1.0 : -std::numeric_limits<double>::infinity();
  }
  ConstraintSystem sys(kinds, mins);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<int> coef(-2, 2);
  std::uniform_int_distribution<int> width(2, 4);
  for (std::size_t r = 0; r < m; ++r) {
    ConstraintRow row{ConstraintKind::SumOfLengths, {}, 0.0};
    const int k = std::min(width(rng), static_cast<int>(n));
    while (static_cast<int>(row.terms.size()) < k) {
      const std::size_t v = pick(rng);
      bool dup = false;
      for (const auto& t : row.terms) dup = dup || t.var == v;
      int c = coef(rng);
      if (dup || c == 0) continue;
      row.terms.push_back({v, static_cast<double>(c)});
    }
    row.target = row.evaluate(x);
    sys.add(row);
  }
  std::vector<double> u(n, 0.0);
  std::uniform_int_distribution<int> nu(1, 3);
  std::uniform_real_distribution<double> du(-15.0, 15.0);
  for (int k = nu(rng); k > 0; --k) u[pick(rng)] = du(rng);
  return {std::move(sys), std::move(x), std::move(u)};
}

}  // namespace offcut::testing
