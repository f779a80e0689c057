#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "opfgap/expr.hpp"
#include "opfgap/nlp.hpp"

using namespace opfgap;

namespace {

// Independent finite-difference machinery (central differences on values
// only), used to cross-check the analytic derivatives.
scalar_t fd_partial(const Expr& e, const vector_t& x, index_t i, scalar_t h = 1e-6) {
  vector_t xp = x, xm = x;
  xp[i] += h;
  xm[i] -= h;
  return (e.value(xp) - e.value(xm)) / (2.0 * h);
}

scalar_t fd_second(const Expr& e, const vector_t& x, index_t i, index_t j, scalar_t h = 1e-4) {
  vector_t a = x, b = x, c = x, d = x;
  a[i] += h;
  a[j] += h;
  b[i] += h;
  b[j] -= h;
  c[i] -= h;
  c[j] += h;
  d[i] -= h;
  d[j] -= h;
  return (e.value(a) - e.value(b) - e.value(c) + e.value(d)) / (4.0 * h * h);
}

matrix_t dense_hessian(const Expr& e, const vector_t& x, index_t n) {
  std::vector<triplet_t> trips;
  e.add_hessian(x, 1.0, trips);
  matrix_t h = matrix_t::Zero(n, n);
  for (const auto& t : trips) h(t.row(), t.col()) += t.value();
  return h;
}

Expr mixed_expression() {
  // 2.5 + 3 x0 - x1 + 0.5 x0 x2 + x1^2 - 0.25 x0 x1 x2 + x3^3
  //     + 1.5 x0 x2 cos(x1 - x3 + 0.2) - 0.75 x2^2 sin(x0 - x1)
  Expr e = Expr::constant(2.5);
  e.add_linear(0, 3.0).add_linear(1, -1.0);
  e.add_quad(0, 2, 0.5).add_quad(1, 1, 1.0);
  e.add_cubic(0, 1, 2, -0.25).add_cubic(3, 3, 3, 1.0);
  e.add_cos(0, 2, 1, 3, 1.5, 0.2);
  e.add_sin(2, 2, 0, 1, -0.75);
  return e;
}

}  // namespace

TEST_CASE("expression values match direct evaluation") {
  const Expr e = mixed_expression();
  vector_t x(4);
  x << 1.1, -0.4, 0.9, 0.3;
  const scalar_t direct = 2.5 + 3.0 * x[0] - x[1] + 0.5 * x[0] * x[2] + x[1] * x[1] -
                          0.25 * x[0] * x[1] * x[2] + x[3] * x[3] * x[3] +
                          1.5 * x[0] * x[2] * std::cos(x[1] - x[3] + 0.2) -
                          0.75 * x[2] * x[2] * std::sin(x[0] - x[1]);
  CHECK(e.value(x) == doctest::Approx(direct).epsilon(1e-14));

  CHECK(Expr::constant(7.0).value(x) == 7.0);
  CHECK(Expr::variable(2).value(x) == doctest::Approx(0.9));
}

TEST_CASE("analytic gradient agrees with central differences") {
  const Expr e = mixed_expression();
  const vector_t points[] = {(vector_t(4) << 1.1, -0.4, 0.9, 0.3).finished(),
                             (vector_t(4) << 0.0, 0.0, 0.0, 0.0).finished(),
                             (vector_t(4) << -2.0, 1.3, 0.5, -0.7).finished()};
  for (const auto& x : points) {
    vector_t grad = vector_t::Zero(4);
    e.add_gradient(x, 1.0, grad);
    for (index_t i = 0; i < 4; ++i) {
      const scalar_t fd = fd_partial(e, x, i);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  // Weighted accumulation adds onto the target.
  vector_t grad = vector_t::Zero(4);
  e.add_gradient(points[0], 2.0, grad);
  e.add_gradient(points[0], -2.0, grad);
  CHECK(grad.norm() == doctest::Approx(0.0));
}

TEST_CASE("analytic Hessian agrees with finite differences, repeats included") {
  vector_t x(4);
  x << 0.8, -0.6, 1.2, 0.4;

  SUBCASE("mixed expression") {
    const Expr e = mixed_expression();
    const matrix_t h = dense_hessian(e, x, 4);
    CHECK((h - h.transpose()).norm() == doctest::Approx(0.0));
    for (index_t i = 0; i < 4; ++i) {
      for (index_t j = 0; j < 4; ++j) {
        CHECK(h(i, j) == doctest::Approx(fd_second(e, x, i, j)).epsilon(5e-5));
      }
    }
  }
  SUBCASE("pure powers via repeated indices") {
    Expr cube;  // x2^3: gradient 3 x^2, curvature 6 x
    cube.add_cubic(2, 2, 2, 1.0);
    vector_t grad = vector_t::Zero(4);
    cube.add_gradient(x, 1.0, grad);
    CHECK(grad[2] == doctest::Approx(3.0 * x[2] * x[2]).epsilon(1e-14));
    CHECK(dense_hessian(cube, x, 4)(2, 2) == doctest::Approx(6.0 * x[2]).epsilon(1e-14));

    Expr sq;
    sq.add_quad(1, 1, 2.0);  // 2 x1^2
    CHECK(dense_hessian(sq, x, 4)(1, 1) == doctest::Approx(4.0));
  }
  SUBCASE("trig with coincident magnitude positions") {
    Expr e;  // x0^2 cos(x1 - x2)
    e.add_cos(0, 0, 1, 2, 1.0);
    const matrix_t h = dense_hessian(e, x, 4);
    for (index_t i = 0; i < 3; ++i) {
      for (index_t j = 0; j < 3; ++j) {
        CHECK(h(i, j) == doctest::Approx(fd_second(e, x, i, j)).epsilon(5e-5));
      }
    }
  }
}

TEST_CASE("structural support covers every finite-difference nonzero") {
  const Expr e = mixed_expression();
  vector_t x(4);
  x << 0.7, 0.2, -0.5, 1.0;

  const auto vars = e.variables();
  CHECK(vars == std::vector<index_t>{0, 1, 2, 3});

  std::set<std::pair<index_t, index_t>> pattern;
  e.hessian_pattern(pattern);
  for (index_t i = 0; i < 4; ++i) {
    for (index_t j = 0; j < 4; ++j) {
      if (std::abs(fd_second(e, x, i, j)) > 1e-6) {
        CHECK(pattern.count({i, j}) == 1);
      }
    }
  }
  CHECK(e.max_variable() == 3);
  CHECK(Expr::constant(1.0).max_variable() == -1);
}

TEST_CASE("operator composition behaves linearly") {
  Expr a = Expr::variable(0);
  Expr b;
  b.add_quad(0, 1, 1.0);
  const Expr combo = 2.0 * a + b - Expr::constant(4.0);
  vector_t x(2);
  x << 3.0, 0.5;
  CHECK(combo.value(x) == doctest::Approx(2.0 * 3.0 + 1.5 - 4.0));
  const Expr neg = -combo;
  CHECK(neg.value(x) == doctest::Approx(-(2.0 * 3.0 + 1.5 - 4.0)));
  CHECK(combo.is_quadratic_or_less());
  CHECK_FALSE(combo.is_linear());
  CHECK(a.is_linear());
}

TEST_CASE("problem container validates structure") {
  NlpProblem p;
  p.tag = "toy";
  p.variables = {{"x", -1.0, 1.0, 0.0}, {"y", 0.0, kUnbounded, 1.0}};
  p.objective = Expr::variable(0);
  p.equalities.push_back({"sum", Expr::variable(0) + Expr::variable(1)});
  p.validate();
  CHECK(p.num_vars() == 2);
  CHECK(p.variable_index("y") == 1);
  CHECK_THROWS_AS(p.variable_index("z"), ValidationError);
  CHECK(p.find_equality("sum") != nullptr);
  CHECK(p.find_equality("nope") == nullptr);
  CHECK(p.initial_point()[1] == 1.0);

  SUBCASE("undeclared variable index") {
    p.inequalities.push_back({"bad", Expr::variable(5)});
    CHECK_THROWS_AS(p.validate(), ValidationError);
  }
  SUBCASE("crossed bounds") {
    p.variables[0].lower = 2.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
  }
  SUBCASE("initial point escapes bounds") {
    p.variables[1].init = -3.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
  }
}
