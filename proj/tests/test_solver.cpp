#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "opfgap/solver.hpp"

using namespace opfgap;

namespace {

void check_outcome_sane(const SolveOutcome& out) {
  // Weak duality surrogate: the dual value never exceeds the primal value
  // by more than roundoff.
  CHECK(out.dual_objective <= out.objective + 1e-6 * (1.0 + std::abs(out.objective)));
  if (out.status == SolveStatus::optimal) {
    CHECK(out.kkt_error <= 1e-8);
    CHECK(out.constraint_violation <= 1e-6);
  }
}

// min (x-3)^2, free variable.
NlpProblem parabola() {
  NlpProblem p;
  p.tag = "parabola";
  p.variables.push_back({"x", -kUnbounded, kUnbounded, 0.0});
  p.objective.add_quad(0, 0, 1.0).add_linear(0, -6.0).add_constant(9.0);
  p.convex = true;
  return p;
}

// Two-bus AC load-flow economics: generator at bus 1 (slack, v1 = 1 fixed),
// load 0.5 + 0.1j at bus 2, series impedance 0.01 + 0.1j.
struct TwoBus {
  scalar_t g, b;

  TwoBus() {
    const scalar_t r = 0.01, x = 0.1;
    const scalar_t d = r * r + x * x;
    g = r / d;
    b = -x / d;
  }

  // Injections implied by (v2, th2) with v1 = 1, th1 = 0.
  scalar_t p2(scalar_t v2, scalar_t c, scalar_t s) const {
    return g * v2 * v2 + v2 * (-g * c - b * s);
  }
  scalar_t q2(scalar_t v2, scalar_t c, scalar_t s) const {
    return -b * v2 * v2 + v2 * (-g * s + b * c);
  }
  scalar_t p1(scalar_t v2, scalar_t c, scalar_t s) const {
    return g + v2 * (-g * c + b * s);
  }
  scalar_t q1(scalar_t v2, scalar_t c, scalar_t s) const {
    return -b + v2 * (g * s + b * c);
  }

  static scalar_t cost(scalar_t pg) { return 0.11 * pg * pg + 5.0 * pg; }

  // vars: 0 v1 (fixed), 1 v2, 2 th1 (fixed), 3 th2, 4 pg, 5 qg
  NlpProblem problem() const {
    NlpProblem p;
    p.tag = "two-bus";
    p.variables.push_back({"v1", 1.0, 1.0, 1.0});
    p.variables.push_back({"v2", 0.9, 1.1, 1.0});
    p.variables.push_back({"th1", 0.0, 0.0, 0.0});
    p.variables.push_back({"th2", -0.5, 0.5, 0.0});
    p.variables.push_back({"pg", 0.0, 2.0, 1.0});
    p.variables.push_back({"qg", -2.0, 2.0, 0.0});
    p.objective.add_quad(4, 4, 0.11).add_linear(4, 5.0);

    Expr bp1;  // p1(v, th) - pg = 0
    bp1.add_quad(0, 0, g);
    bp1.add_cos(0, 1, 2, 3, -g);
    bp1.add_sin(0, 1, 2, 3, -b);
    bp1.add_linear(4, -1.0);
    p.equalities.push_back({"bal_p1", bp1});

    Expr bq1;  // q1(v, th) - qg = 0
    bq1.add_quad(0, 0, -b);
    bq1.add_sin(0, 1, 2, 3, -g);
    bq1.add_cos(0, 1, 2, 3, b);
    bq1.add_linear(5, -1.0);
    p.equalities.push_back({"bal_q1", bq1});

    Expr bp2;  // p2(v, th) + 0.5 = 0
    bp2.add_quad(1, 1, g);
    bp2.add_cos(1, 0, 3, 2, -g);
    bp2.add_sin(1, 0, 3, 2, -b);
    bp2.add_constant(0.5);
    p.equalities.push_back({"bal_p2", bp2});

    Expr bq2;  // q2(v, th) + 0.1 = 0
    bq2.add_quad(1, 1, -b);
    bq2.add_sin(1, 0, 3, 2, -g);
    bq2.add_cos(1, 0, 3, 2, b);
    bq2.add_constant(0.1);
    p.equalities.push_back({"bal_q2", bq2});
    return p;
  }
};

struct GridPoint {
  scalar_t v2 = 0.0, th2 = 0.0, residual = 1e30;
};

// Exhaustive scan for the load-flow solution: minimize the max-norm mismatch
// over a (v2, th2) lattice. One coarse pass at the requested resolution, then
// a fine pass around the winner.
GridPoint grid_search(const TwoBus& net, scalar_t v_lo, scalar_t v_hi, scalar_t t_lo,
                      scalar_t t_hi, scalar_t step) {
  GridPoint best;
  const auto nv = static_cast<long>(std::floor((v_hi - v_lo) / step + 0.5)) + 1;
  const auto nt = static_cast<long>(std::floor((t_hi - t_lo) / step + 0.5)) + 1;
  for (long it = 0; it < nt; ++it) {
    const scalar_t th = t_lo + static_cast<scalar_t>(it) * step;
    const scalar_t c = std::cos(th), s = std::sin(th);
    for (long iv = 0; iv < nv; ++iv) {
      const scalar_t v2 = v_lo + static_cast<scalar_t>(iv) * step;
      const scalar_t res = std::max(std::abs(net.p2(v2, c, s) + 0.5),
                                    std::abs(net.q2(v2, c, s) + 0.1));
      if (res < best.residual) best = {v2, th, res};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("unconstrained parabola") {
  const SolveOutcome out = IpmSolver().solve(parabola());
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(std::abs(out.x[0] - 3.0) < 1e-7);
  CHECK(std::abs(out.objective) < 1e-10);
  check_outcome_sane(out);
}

TEST_CASE("active bound carries unit multiplier") {
  // min x with x >= 2: at the solution the lower-bound multiplier equals the
  // objective gradient.
  NlpProblem p;
  p.tag = "lp-bound";
  p.variables.push_back({"x", 2.0, kUnbounded, 10.0});
  p.objective.add_linear(0, 1.0);
  p.convex = true;
  const SolveOutcome out = IpmSolver().solve(p);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(std::abs(out.x[0] - 2.0) < 1e-6);
  CHECK(std::abs(out.objective - 2.0) < 1e-6);
  CHECK(std::abs(out.z_lower[0] - 1.0) < 1e-6);
  check_outcome_sane(out);
}

TEST_CASE("equality multiplier matches hand KKT solution") {
  // min x^2 + y^2 s.t. x + y = 2  =>  x = y = 1, multiplier -2.
  NlpProblem p;
  p.tag = "eq-qp";
  p.variables.push_back({"x", -kUnbounded, kUnbounded, 5.0});
  p.variables.push_back({"y", -kUnbounded, kUnbounded, -4.0});
  p.objective.add_quad(0, 0, 1.0).add_quad(1, 1, 1.0);
  Expr row;
  row.add_linear(0, 1.0).add_linear(1, 1.0).add_constant(-2.0);
  p.equalities.push_back({"sum", row});
  p.convex = true;
  const SolveOutcome out = IpmSolver().solve(p);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(std::abs(out.x[0] - 1.0) < 1e-7);
  CHECK(std::abs(out.x[1] - 1.0) < 1e-7);
  CHECK(std::abs(out.y_equality[0] + 2.0) < 1e-6);
  check_outcome_sane(out);
}

TEST_CASE("inequality-constrained qp against projection formula") {
  // min (x-2)^2 + (y+1)^2 s.t. x + y <= 1/2. The unconstrained optimum
  // violates the cut, so the solution is its projection onto x + y = 1/2:
  // shift both coordinates by half the gap; multiplier = gap.
  const scalar_t gap = (2.0 + (-1.0)) - 0.5;
  const scalar_t xs = 2.0 - 0.5 * gap, ys = -1.0 - 0.5 * gap;
  const scalar_t obj = 2.0 * 0.25 * gap * gap;

  NlpProblem p;
  p.tag = "ineq-qp";
  p.variables.push_back({"x", -kUnbounded, kUnbounded, 0.0});
  p.variables.push_back({"y", -kUnbounded, kUnbounded, 0.0});
  p.objective.add_quad(0, 0, 1.0).add_linear(0, -4.0).add_constant(4.0);
  p.objective.add_quad(1, 1, 1.0).add_linear(1, 2.0).add_constant(1.0);
  Expr cut;
  cut.add_linear(0, 1.0).add_linear(1, 1.0).add_constant(-0.5);
  p.inequalities.push_back({"cut", cut});
  p.convex = true;

  const SolveOutcome a = IpmSolver().solve(p);
  REQUIRE(a.status == SolveStatus::optimal);
  CHECK(std::abs(a.x[0] - xs) < 1e-6);
  CHECK(std::abs(a.x[1] - ys) < 1e-6);
  CHECK(std::abs(a.objective - obj) < 1e-7);
  CHECK(std::abs(a.y_inequality[0] - gap) < 1e-5);
  check_outcome_sane(a);

  // Same convex instance from a far-away start must land on the same value.
  p.variables[0].init = -30.0;
  p.variables[1].init = 25.0;
  const SolveOutcome b = IpmSolver().solve(p);
  REQUIRE(b.status == SolveStatus::optimal);
  CHECK(std::abs(a.objective - b.objective) <= 1e-6 * (1.0 + std::abs(a.objective)));
}

TEST_CASE("two-bus dispatch matches exhaustive grid search") {
  const TwoBus net;
  GridPoint best = grid_search(net, 0.9, 1.1, -0.5, 0.5, 1e-4);
  REQUIRE(best.residual < 2e-3);  // a load-flow solution exists in the box
  best = grid_search(net, best.v2 - 2e-4, best.v2 + 2e-4, best.th2 - 2e-4, best.th2 + 2e-4,
                     1e-6);
  REQUIRE(best.residual < 2e-5);
  const scalar_t c = std::cos(best.th2), s = std::sin(best.th2);
  const scalar_t pg_ref = net.p1(best.v2, c, s);
  const scalar_t qg_ref = net.q1(best.v2, c, s);
  const scalar_t obj_ref = TwoBus::cost(pg_ref);

  const SolveOutcome out = IpmSolver().solve(net.problem());
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(std::abs(out.objective - obj_ref) <= 1e-3 * std::abs(obj_ref));
  CHECK(std::abs(out.x[1] - best.v2) < 1e-3);
  CHECK(std::abs(out.x[3] - best.th2) < 1e-3);
  CHECK(std::abs(out.x[4] - pg_ref) < 1e-3);
  CHECK(std::abs(out.x[5] - qg_ref) < 1e-3);
  CHECK(std::abs(out.x[0] - 1.0) < 1e-9);  // fixed slack voltage
  CHECK(std::abs(out.x[2]) < 1e-9);        // fixed reference angle
  check_outcome_sane(out);
}

TEST_CASE("barrier parameter is non-increasing and logging fires") {
  std::vector<scalar_t> mus;
  SolverOptions opts;
  opts.log = [&mus](const std::string& line) {
    const auto pos = line.find("mu ");
    REQUIRE(pos != std::string::npos);
    mus.push_back(std::stod(line.substr(pos + 3)));
  };
  const TwoBus net;
  const SolveOutcome out = IpmSolver(opts).solve(net.problem());
  REQUIRE(out.status == SolveStatus::optimal);
  REQUIRE(mus.size() >= 3);
  CHECK(static_cast<index_t>(mus.size()) <= out.iterations);
  for (std::size_t i = 1; i < mus.size(); ++i) CHECK(mus[i] <= mus[i - 1] + 1e-15);
}

TEST_CASE("infeasible convex instance is proved infeasible") {
  // x >= 3 as a bound against x <= 1 as a row: minimized L1 violation is 2.
  NlpProblem p;
  p.tag = "infeasible-lp";
  p.variables.push_back({"x", 3.0, kUnbounded, 4.0});
  p.objective.add_linear(0, 1.0);
  Expr cut;
  cut.add_linear(0, 1.0).add_constant(-1.0);
  p.inequalities.push_back({"cap", cut});
  p.convex = true;
  const SolveOutcome out = IpmSolver().solve(p);
  REQUIRE(out.status == SolveStatus::locally_infeasible);
  CHECK(out.infeasibility_proved);
  CHECK(out.infeasibility_measure > 1.9);
  CHECK(out.infeasibility_measure < 2.1);
}

TEST_CASE("nonconvex equality with a feasible witness is solved, not rejected") {
  // min x + y on the circle x^2 + y^2 = 4; witness (sqrt(2), -sqrt(2)) is
  // feasible, so locally_infeasible would be a wrong answer. The KKT points
  // are (+-sqrt(2), +-sqrt(2)); the minimum value is -2*sqrt(2).
  NlpProblem p;
  p.tag = "circle";
  p.variables.push_back({"x", -kUnbounded, kUnbounded, 1.0});
  p.variables.push_back({"y", -kUnbounded, kUnbounded, -1.0});
  p.objective.add_linear(0, 1.0).add_linear(1, 1.0);
  Expr circle;
  circle.add_quad(0, 0, 1.0).add_quad(1, 1, 1.0).add_constant(-4.0);
  p.equalities.push_back({"radius", circle});
  const scalar_t witness[2] = {std::sqrt(2.0), -std::sqrt(2.0)};
  CHECK(std::abs(witness[0] * witness[0] + witness[1] * witness[1] - 4.0) < 1e-12);

  const SolveOutcome out = IpmSolver().solve(p);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(out.constraint_violation < 1e-7);
  CHECK(std::abs(out.objective + 2.0 * std::sqrt(2.0)) < 1e-6);
  check_outcome_sane(out);
}

TEST_CASE("fixed variables are pinned exactly") {
  NlpProblem p;
  p.tag = "pin";
  p.variables.push_back({"x", -kUnbounded, kUnbounded, 0.0});
  p.variables.push_back({"y", 3.0, 3.0, 3.0});
  p.objective.add_quad(0, 0, 1.0).add_linear(0, -2.0).add_constant(1.0);  // (x-1)^2
  p.objective.add_quad(1, 1, 1.0).add_linear(1, -4.0).add_constant(4.0);  // (y-2)^2
  p.convex = true;
  const SolveOutcome out = IpmSolver().solve(p);
  REQUIRE(out.status == SolveStatus::optimal);
  CHECK(std::abs(out.x[0] - 1.0) < 1e-7);
  CHECK(std::abs(out.x[1] - 3.0) < 1e-9);
  CHECK(std::abs(out.objective - 1.0) < 1e-7);
}

TEST_CASE("iteration and time limits are reported") {
  const TwoBus net;
  SolverOptions opts;
  opts.max_iterations = 2;
  SolveOutcome out = IpmSolver(opts).solve(net.problem());
  CHECK(out.status == SolveStatus::iteration_limit);
  CHECK(out.iterations == 2);
  CHECK(std::isfinite(out.objective));

  SolverOptions topts;
  topts.time_limit_s = 1e-12;
  out = IpmSolver(topts).solve(net.problem());
  CHECK(out.status == SolveStatus::time_limit);
}

TEST_CASE("status names") {
  CHECK(to_string(SolveStatus::optimal) == "optimal");
  CHECK(to_string(SolveStatus::locally_infeasible) == "locally_infeasible");
  CHECK(to_string(SolveStatus::iteration_limit) == "iteration_limit");
  CHECK(to_string(SolveStatus::time_limit) == "time_limit");
  CHECK(to_string(SolveStatus::numeric_failure) == "numeric_failure");
}

TEST_CASE("derivative check tolerances by problem class") {
  SUBCASE("linear") {
    NlpProblem p;
    p.tag = "lin";
    p.variables.push_back({"x", -kUnbounded, kUnbounded, 0.3});
    p.variables.push_back({"y", -kUnbounded, kUnbounded, -1.7});
    p.objective.add_linear(0, 3.0).add_linear(1, -2.0).add_constant(1.0);
    Expr row;
    row.add_linear(0, 1.0).add_linear(1, 1.0).add_constant(-1.0);
    p.equalities.push_back({"sum", row});
    CHECK(check_derivatives(p, p.initial_point()) <= 1e-9);
  }
  SUBCASE("quadratic") {
    NlpProblem p;
    p.tag = "quad";
    p.variables.push_back({"x", -kUnbounded, kUnbounded, 0.8});
    p.variables.push_back({"y", -kUnbounded, kUnbounded, 1.1});
    p.objective.add_quad(0, 0, 1.0).add_linear(0, -6.0).add_quad(0, 1, 1.0);
    Expr ball;
    ball.add_quad(0, 0, 1.0).add_quad(1, 1, 1.0).add_constant(-4.0);
    p.inequalities.push_back({"ball", ball});
    CHECK(check_derivatives(p, p.initial_point()) <= 1e-7);
  }
  SUBCASE("trigonometric network balance at a random interior point") {
    const TwoBus net;
    const NlpProblem p = net.problem();
    std::mt19937 rng(7);
    std::uniform_real_distribution<scalar_t> unit(0.0, 1.0);
    vector_t x(6);
    x[0] = 1.0;
    x[1] = 0.9 + 0.2 * unit(rng);
    x[2] = 0.0;
    x[3] = -0.5 + unit(rng);
    x[4] = 2.0 * unit(rng);
    x[5] = -2.0 + 4.0 * unit(rng);
    CHECK(check_derivatives(p, x) <= 1e-5);
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(check_derivatives(parabola(), vector_t::Zero(4)), ValidationError);
  }
}
