#include "opfgap/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace opfgap {

Expr Expr::constant(scalar_t value) {
  Expr e;
  e.constant_ = value;
  return e;
}

Expr Expr::variable(index_t var) {
  Expr e;
  e.add_linear(var, 1.0);
  return e;
}

Expr& Expr::add_constant(scalar_t value) {
  constant_ += value;
  return *this;
}

Expr& Expr::add_linear(index_t var, scalar_t coef) {
  if (coef != 0.0) linear_.push_back({var, coef});
  return *this;
}

Expr& Expr::add_quad(index_t a, index_t b, scalar_t coef) {
  if (coef != 0.0) quads_.push_back({a, b, coef});
  return *this;
}

Expr& Expr::add_cubic(index_t a, index_t b, index_t c, scalar_t coef) {
  if (coef != 0.0) cubics_.push_back({a, b, c, coef});
  return *this;
}

Expr& Expr::add_cos(index_t a, index_t b, index_t c, index_t d, scalar_t coef, scalar_t phase) {
  if (coef != 0.0) trigs_.push_back({a, b, c, d, coef, false, phase});
  return *this;
}

Expr& Expr::add_sin(index_t a, index_t b, index_t c, index_t d, scalar_t coef, scalar_t phase) {
  if (coef != 0.0) trigs_.push_back({a, b, c, d, coef, true, phase});
  return *this;
}

Expr& Expr::operator+=(const Expr& other) {
  constant_ += other.constant_;
  linear_.insert(linear_.end(), other.linear_.begin(), other.linear_.end());
  quads_.insert(quads_.end(), other.quads_.begin(), other.quads_.end());
  cubics_.insert(cubics_.end(), other.cubics_.begin(), other.cubics_.end());
  trigs_.insert(trigs_.end(), other.trigs_.begin(), other.trigs_.end());
  return *this;
}

Expr& Expr::operator*=(scalar_t factor) {
  constant_ *= factor;
  for (auto& t : linear_) t.coef *= factor;
  for (auto& t : quads_) t.coef *= factor;
  for (auto& t : cubics_) t.coef *= factor;
  for (auto& t : trigs_) t.coef *= factor;
  return *this;
}

scalar_t Expr::value(const vector_t& x) const {
  scalar_t v = constant_;
  for (const auto& t : linear_) v += t.coef * x[t.var];
  for (const auto& t : quads_) v += t.coef * x[t.a] * x[t.b];
  for (const auto& t : cubics_) v += t.coef * x[t.a] * x[t.b] * x[t.c];
  for (const auto& t : trigs_) {
    const scalar_t th = x[t.c] - x[t.d] + t.phase;
    v += t.coef * x[t.a] * x[t.b] * (t.is_sin ? std::sin(th) : std::cos(th));
  }
  return v;
}

void Expr::add_gradient(const vector_t& x, scalar_t weight, vector_t& grad) const {
  for (const auto& t : linear_) grad[t.var] += weight * t.coef;
  for (const auto& t : quads_) {
    grad[t.a] += weight * t.coef * x[t.b];
    grad[t.b] += weight * t.coef * x[t.a];
  }
  for (const auto& t : cubics_) {
    grad[t.a] += weight * t.coef * x[t.b] * x[t.c];
    grad[t.b] += weight * t.coef * x[t.a] * x[t.c];
    grad[t.c] += weight * t.coef * x[t.a] * x[t.b];
  }
  for (const auto& t : trigs_) {
    const scalar_t th = x[t.c] - x[t.d] + t.phase;
    const scalar_t f = t.is_sin ? std::sin(th) : std::cos(th);
    const scalar_t df = t.is_sin ? std::cos(th) : -std::sin(th);
    grad[t.a] += weight * t.coef * x[t.b] * f;
    grad[t.b] += weight * t.coef * x[t.a] * f;
    const scalar_t dtheta = weight * t.coef * x[t.a] * x[t.b] * df;
    grad[t.c] += dtheta;
    grad[t.d] -= dtheta;
  }
}

void Expr::add_hessian(const vector_t& x, scalar_t weight, std::vector<triplet_t>& out) const {
  auto emit = [&out](index_t i, index_t j, scalar_t v) {
    out.emplace_back(i, j, v);
    out.emplace_back(j, i, v);
  };
  for (const auto& t : quads_) emit(t.a, t.b, weight * t.coef);
  for (const auto& t : cubics_) {
    emit(t.a, t.b, weight * t.coef * x[t.c]);
    emit(t.a, t.c, weight * t.coef * x[t.b]);
    emit(t.b, t.c, weight * t.coef * x[t.a]);
  }
  for (const auto& t : trigs_) {
    const scalar_t th = x[t.c] - x[t.d] + t.phase;
    const scalar_t f = t.is_sin ? std::sin(th) : std::cos(th);
    const scalar_t df = t.is_sin ? std::cos(th) : -std::sin(th);
    const scalar_t ddf = -f;  // both trig kinds: f'' = -f
    const scalar_t w = weight * t.coef;
    emit(t.a, t.b, w * f);
    emit(t.a, t.c, w * x[t.b] * df);
    emit(t.a, t.d, -w * x[t.b] * df);
    emit(t.b, t.c, w * x[t.a] * df);
    emit(t.b, t.d, -w * x[t.a] * df);
    // Angle block: d2f/dc2 = f'', d2f/dd2 = f'', d2f/dcdd = -f''.
    const scalar_t curv = w * x[t.a] * x[t.b] * ddf;
    out.emplace_back(t.c, t.c, curv);
    out.emplace_back(t.d, t.d, curv);
    emit(t.c, t.d, -curv);
  }
}

std::vector<index_t> Expr::variables() const {
  std::set<index_t> vars;
  for (const auto& t : linear_) vars.insert(t.var);
  for (const auto& t : quads_) {
    vars.insert(t.a);
    vars.insert(t.b);
  }
  for (const auto& t : cubics_) {
    vars.insert(t.a);
    vars.insert(t.b);
    vars.insert(t.c);
  }
  for (const auto& t : trigs_) {
    vars.insert(t.a);
    vars.insert(t.b);
    vars.insert(t.c);
    vars.insert(t.d);
  }
  return {vars.begin(), vars.end()};
}

void Expr::hessian_pattern(std::set<std::pair<index_t, index_t>>& out) const {
  auto emit = [&out](index_t i, index_t j) {
    out.emplace(i, j);
    out.emplace(j, i);
  };
  for (const auto& t : quads_) emit(t.a, t.b);
  for (const auto& t : cubics_) {
    emit(t.a, t.b);
    emit(t.a, t.c);
    emit(t.b, t.c);
  }
  for (const auto& t : trigs_) {
    emit(t.a, t.b);
    emit(t.a, t.c);
    emit(t.a, t.d);
    emit(t.b, t.c);
    emit(t.b, t.d);
    emit(t.c, t.d);
    emit(t.c, t.c);
    emit(t.d, t.d);
  }
}

index_t Expr::max_variable() const {
  index_t m = -1;
  for (const auto& t : linear_) m = std::max(m, t.var);
  for (const auto& t : quads_) m = std::max({m, t.a, t.b});
  for (const auto& t : cubics_) m = std::max({m, t.a, t.b, t.c});
  for (const auto& t : trigs_) m = std::max({m, t.a, t.b, t.c, t.d});
  return m;
}

Expr operator+(Expr lhs, const Expr& rhs) {
  lhs += rhs;
  return lhs;
}

Expr operator-(Expr lhs, const Expr& rhs) {
  Expr neg = rhs;
  neg *= -1.0;
  lhs += neg;
  return lhs;
}

Expr operator*(scalar_t factor, Expr expr) {
  expr *= factor;
  return expr;
}

Expr operator-(Expr expr) {
  expr *= -1.0;
  return expr;
}

}  // namespace opfgap
