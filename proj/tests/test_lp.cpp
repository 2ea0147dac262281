#include <doctest.h>

#include <cmath>
#include <sstream>

#include "carbonclear/errors.hpp"
#include "carbonclear/lp.hpp"
#include "carbonclear/rng.hpp"
#include "lp_reference.hpp"

using namespace carbonclear;
namespace clp = carbonclear::lp;

TEST_SUITE_BEGIN("lp");

TEST_CASE("single bounded variable") {
  clp::LinearProgram lp;
  lp.sense = clp::Sense::Maximize;
  lp.add_variable(0.0, clp::kInf, 1.0, "x");
  clp::Constraint c;
  c.coeffs = {{0, 1.0}};
  c.relation = clp::Relation::LessEqual;
  c.rhs = 3.0;
  lp.add_constraint(c);

  const clp::Solution s = clp::solve_lp(lp);
  REQUIRE(s.status == clp::Status::Optimal);
  CHECK(s.values[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("degenerate face: assert objective only") {
  clp::LinearProgram lp;
  lp.sense = clp::Sense::Maximize;
  lp.add_variable(0.0, clp::kInf, 1.0);
  lp.add_variable(0.0, clp::kInf, 1.0);
  clp::Constraint c;
  c.coeffs = {{0, 1.0}, {1, 1.0}};
  c.rhs = 1.0;
  lp.add_constraint(c);

  const clp::Solution s = clp::solve_lp(lp);
  REQUIRE(s.status == clp::Status::Optimal);
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("equalities and mixed bounds") {
  clp::LinearProgram lp;
  lp.add_variable(0.0, 10.0, 1.0);
  lp.add_variable(0.0, 10.0, -1.0);
  clp::Constraint c;
  c.coeffs = {{0, 1.0}, {1, 1.0}};
  c.relation = clp::Relation::Equal;
  c.rhs = 5.0;
  lp.add_constraint(c);

  const clp::Solution s = clp::solve_lp(lp);
  REQUIRE(s.status == clp::Status::Optimal);
  CHECK(s.values[0] == doctest::Approx(0.0));
  CHECK(s.values[1] == doctest::Approx(5.0));
  CHECK(s.objective == doctest::Approx(-5.0));
}

TEST_CASE("infeasible interval is certified") {
  clp::LinearProgram lp;
  lp.add_variable(-clp::kInf, clp::kInf, 1.0);
  clp::Constraint ge;
  ge.coeffs = {{0, 1.0}};
  ge.relation = clp::Relation::GreaterEqual;
  ge.rhs = 2.0;
  ge.name = "floor[]";
  lp.add_constraint(ge);
  clp::Constraint le;
  le.coeffs = {{0, 1.0}};
  le.relation = clp::Relation::LessEqual;
  le.rhs = 1.0;
  le.name = "cap[]";
  lp.add_constraint(le);

  const clp::Solution s = clp::solve_lp(lp);
  REQUIRE(s.status == clp::Status::Infeasible);
  CHECK(!s.infeasible_rows.empty());
}

TEST_CASE("unbounded direction is reported") {
  clp::LinearProgram lp;
  lp.sense = clp::Sense::Maximize;
  lp.add_variable(0.0, clp::kInf, 1.0);
  const clp::Solution s = clp::solve_lp(lp);
  CHECK(s.status == clp::Status::Unbounded);
}

TEST_CASE("structural defects are input errors") {
  clp::LinearProgram lp;
  lp.add_variable(1.0, 0.0, 0.0);  // inverted bounds
  CHECK_THROWS_AS(clp::solve_lp(lp), InputError);

  clp::LinearProgram lp2;
  lp2.add_variable(0.0, 1.0, 0.0);
  clp::Constraint c;
  c.coeffs = {{5, 1.0}};  // undeclared variable
  lp2.add_constraint(c);
  CHECK_THROWS_AS(clp::solve_lp(lp2), InputError);
}

TEST_CASE("iteration cap raises a diagnostic naming the limit") {
  Rng rng(7);
  const clp::LinearProgram lp = testutil::random_bounded_lp(rng);
  clp::SolverOptions opts;
  opts.max_iterations = 0;
  try {
    clp::solve_lp(lp, opts);
    // A trivially-optimal start is possible; nothing to assert then.
  } catch (const IterationLimitError& e) {
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }
}

TEST_CASE("duals give the objective slope in the requested sense") {
  clp::LinearProgram lp;
  lp.sense = clp::Sense::Maximize;
  lp.add_variable(0.0, 10.0, 3.0);
  clp::Constraint c;
  c.coeffs = {{0, 1.0}};
  c.rhs = 2.0;
  lp.add_constraint(c);
  const clp::Solution s = clp::solve_lp(lp);
  REQUIRE(s.status == clp::Status::Optimal);
  CHECK(s.duals[0] == doctest::Approx(3.0));
}

TEST_CASE("matches vertex enumeration on 200 seeded instances") {
  int solved = 0;
  for (int i = 0; i < 200; ++i) {
    Rng rng(derive_seed(9001, {static_cast<std::uint64_t>(i)}));
    const clp::LinearProgram lp = testutil::random_bounded_lp(rng);
    const auto oracle = testutil::best_vertex_objective(lp);
    REQUIRE_MESSAGE(oracle.has_value(), "instance ", i,
                    " should be feasible by construction");
    const clp::Solution s = clp::solve_lp(lp);
    REQUIRE_MESSAGE(s.status == clp::Status::Optimal, "instance ", i);
    CHECK_MESSAGE(
        std::abs(s.objective - *oracle) <= 1e-8 * std::max(1.0,
                                                           std::abs(*oracle)),
        "instance ", i, ": solver ", s.objective, " vs oracle ", *oracle);
    ++solved;
  }
  CHECK(solved == 200);
}

TEST_CASE("optimal points satisfy feasibility and complementary slackness") {
  for (int i = 0; i < 40; ++i) {
    Rng rng(derive_seed(4242, {static_cast<std::uint64_t>(i)}));
    const clp::LinearProgram lp = testutil::random_bounded_lp(rng);
    const clp::Solution s = clp::solve_lp(lp);
    REQUIRE(s.status == clp::Status::Optimal);
    for (std::size_t r = 0; r < lp.constraints.size(); ++r) {
      const auto& c = lp.constraints[r];
      double v = 0.0;
      for (const auto& [j, coeff] : c.coeffs) v += coeff * s.values[j];
      const double scale = 1.0 + std::abs(c.rhs);
      switch (c.relation) {
        case clp::Relation::LessEqual:
          CHECK(v <= c.rhs + 1e-7 * scale);
          break;
        case clp::Relation::GreaterEqual:
          CHECK(v >= c.rhs - 1e-7 * scale);
          break;
        case clp::Relation::Equal:
          CHECK(std::abs(v - c.rhs) <= 1e-7 * scale);
          break;
      }
      // Complementary slackness: inactive rows carry no dual weight.
      const double slack = c.rhs - v;
      const double residual = std::abs(s.duals[r] * slack) /
                              ((1.0 + std::abs(s.duals[r])) * scale);
      CHECK(residual <= 1e-6);
    }
  }
}

TEST_CASE("bit-identical resolve") {
  Rng rng(derive_seed(77, {3}));
  const clp::LinearProgram lp = testutil::random_bounded_lp(rng);
  const clp::Solution a = clp::solve_lp(lp);
  const clp::Solution b = clp::solve_lp(lp);
  REQUIRE(a.status == b.status);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    CHECK(a.values[j] == b.values[j]);
  }
  CHECK(a.objective == b.objective);
}

TEST_CASE("debug dump emits the documented sections") {
  clp::LinearProgram lp;
  lp.sense = clp::Sense::Minimize;
  lp.add_variable(0.0, 5.0, 2.0, "gen");
  lp.add_variable(-clp::kInf, clp::kInf, 0.0, "angle");
  clp::Constraint c;
  c.coeffs = {{0, 1.0}, {1, -1.0}};
  c.rhs = 1.0;
  c.name = "balance[b1]";
  lp.add_constraint(c);
  std::ostringstream os;
  clp::write_lp_file(lp, os);
  const std::string text = os.str();
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("Subject To") != std::string::npos);
  CHECK(text.find("balance[b1]:") != std::string::npos);
  CHECK(text.find("angle free") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}

TEST_SUITE_END();
