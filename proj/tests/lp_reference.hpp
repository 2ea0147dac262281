#pragma once

// Test-only oracles. Everything here is independent of the production
// simplex path: optima come from enumerating basic solutions directly.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "carbonclear/lp.hpp"
#include "carbonclear/rng.hpp"

namespace testutil {

// Best objective over all vertices of the feasible polytope, found by
// enumerating every choice of n active rows (constraints-as-equalities plus
// variable bounds). Requires finite bounds on every variable so the
// feasible set is a polytope. Returns nullopt when no feasible vertex
// exists.
inline std::optional<double> best_vertex_objective(
    const carbonclear::lp::LinearProgram& lp) {
  namespace clp = carbonclear::lp;
  const int n = static_cast<int>(lp.num_vars());

  struct Row {
    Eigen::VectorXd a;
    double rhs;
  };
  std::vector<Row> rows;
  for (const auto& c : lp.constraints) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (const auto& [j, v] : c.coeffs) a[j] += v;
    rows.push_back({a, c.rhs});
  }
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
    lo[j] = 1.0;
    rows.push_back({lo, lp.lower[j]});
    Eigen::VectorXd hi = Eigen::VectorXd::Zero(n);
    hi[j] = 1.0;
    rows.push_back({hi, lp.upper[j]});
  }

  const int total = static_cast<int>(rows.size());
  std::vector<int> pick(n);
  std::optional<double> best;

  auto feasible = [&](const Eigen::VectorXd& x) {
    for (int j = 0; j < n; ++j) {
      if (x[j] < lp.lower[j] - 1e-7 || x[j] > lp.upper[j] + 1e-7) {
        return false;
      }
    }
    for (const auto& c : lp.constraints) {
      double v = 0.0;
      for (const auto& [j, coeff] : c.coeffs) v += coeff * x[j];
      const double tol = 1e-7 * (1.0 + std::abs(c.rhs));
      switch (c.relation) {
        case clp::Relation::LessEqual:
          if (v > c.rhs + tol) return false;
          break;
        case clp::Relation::GreaterEqual:
          if (v < c.rhs - tol) return false;
          break;
        case clp::Relation::Equal:
          if (std::abs(v - c.rhs) > tol) return false;
          break;
      }
    }
    return true;
  };

  auto consider = [&](const std::vector<int>& active) {
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (int r = 0; r < n; ++r) {
      A.row(r) = rows[active[r]].a.transpose();
      b[r] = rows[active[r]].rhs;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-9);
    if (lu.rank() < n) return;
    const Eigen::VectorXd x = lu.solve(b);
    if ((A * x - b).cwiseAbs().maxCoeff() > 1e-7) return;
    if (!feasible(x)) return;
    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
    if (!best) {
      best = obj;
    } else if (lp.sense == clp::Sense::Maximize) {
      best = std::max(*best, obj);
    } else {
      best = std::min(*best, obj);
    }
  };

  // Iterative k-subset enumeration.
  for (int r = 0; r < n; ++r) pick[r] = r;
  if (total < n) return std::nullopt;
  while (true) {
    consider(pick);
    int i = n - 1;
    while (i >= 0 && pick[i] == total - n + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
  }
  return best;
}

// Random LP with finite bounds on every variable and an interior point
// baked in, so the instance is feasible and bounded by construction.
inline carbonclear::lp::LinearProgram random_bounded_lp(carbonclear::Rng& rng) {
  namespace clp = carbonclear::lp;
  clp::LinearProgram lp;
  const int n = 1 + static_cast<int>(rng.below(6));
  const int k = 1 + static_cast<int>(rng.below(8));
  lp.sense = rng.next() % 2 == 0 ? clp::Sense::Maximize : clp::Sense::Minimize;

  std::vector<double> x0(n);
  for (int j = 0; j < n; ++j) {
    const double lo = rng.uniform(-5.0, 0.0);
    const double span = rng.uniform(0.5, 10.0);
    lp.add_variable(lo, lo + span, rng.uniform(-10.0, 10.0));
    x0[j] = lo + rng.uniform(0.1, 0.9) * span;
  }
  for (int c = 0; c < k; ++c) {
    clp::Constraint row;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform01() < 0.7) {
        row.coeffs.emplace_back(j, rng.uniform(-5.0, 5.0));
      }
    }
    if (row.coeffs.empty()) {
      row.coeffs.emplace_back(static_cast<int>(rng.below(n)),
                              rng.uniform(-5.0, 5.0));
    }
    double v = 0.0;
    for (const auto& [j, coeff] : row.coeffs) v += coeff * x0[j];
    switch (rng.below(3)) {
      case 0:
        row.relation = clp::Relation::LessEqual;
        row.rhs = v + rng.uniform(0.1, 5.0);
        break;
      case 1:
        row.relation = clp::Relation::GreaterEqual;
        row.rhs = v - rng.uniform(0.1, 5.0);
        break;
      default:
        row.relation = clp::Relation::Equal;
        row.rhs = v;
        break;
    }
    lp.add_constraint(std::move(row));
  }
  return lp;
}

}  // namespace testutil
