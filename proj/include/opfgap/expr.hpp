#pragma once

#include <set>
#include <utility>
#include <vector>

#include "opfgap/types.hpp"

namespace opfgap {

/** Smooth scalar expression: constant + linear + quadratic + cubic monomials
 *  plus voltage-product trigonometric terms
 *      coef * x_a * x_b * {cos,sin}(x_c - x_d + phase).
 *  This term algebra is closed over everything the formulations emit, so
 *  values, gradients and Hessians are exact (no AD tape, no rounding beyond
 *  FP). Repeated indices inside a term are handled by position-wise
 *  accumulation of partials.
 */
class Expr {
 public:
  struct Lin {
    index_t var;
    scalar_t coef;
  };
  struct Quad {  // coef * x_a * x_b
    index_t a, b;
    scalar_t coef;
  };
  struct Cubic {  // coef * x_a * x_b * x_c
    index_t a, b, c;
    scalar_t coef;
  };
  struct Trig {  // coef * x_a * x_b * f(x_c - x_d + phase)
    index_t a, b, c, d;
    scalar_t coef;
    bool is_sin;  // false: cosine
    scalar_t phase;
  };

  Expr() = default;
  static Expr constant(scalar_t value);
  static Expr variable(index_t var);

  Expr& add_constant(scalar_t value);
  Expr& add_linear(index_t var, scalar_t coef);
  Expr& add_quad(index_t a, index_t b, scalar_t coef);
  Expr& add_cubic(index_t a, index_t b, index_t c, scalar_t coef);
  Expr& add_cos(index_t a, index_t b, index_t c, index_t d, scalar_t coef, scalar_t phase = 0.0);
  Expr& add_sin(index_t a, index_t b, index_t c, index_t d, scalar_t coef, scalar_t phase = 0.0);

  Expr& operator+=(const Expr& other);
  Expr& operator*=(scalar_t factor);

  scalar_t constant_part() const { return constant_; }
  const std::vector<Lin>& linear_terms() const { return linear_; }
  const std::vector<Quad>& quad_terms() const { return quads_; }
  const std::vector<Cubic>& cubic_terms() const { return cubics_; }
  const std::vector<Trig>& trig_terms() const { return trigs_; }
  bool is_linear() const { return quads_.empty() && cubics_.empty() && trigs_.empty(); }
  bool is_quadratic_or_less() const { return cubics_.empty() && trigs_.empty(); }

  scalar_t value(const vector_t& x) const;

  /** grad += weight * d(expr)/dx. */
  void add_gradient(const vector_t& x, scalar_t weight, vector_t& grad) const;

  /** Append weight * Hessian(expr) at x as symmetric triplets (both halves). */
  void add_hessian(const vector_t& x, scalar_t weight, std::vector<triplet_t>& out) const;

  /** Sorted unique variables with structurally nonzero first derivatives. */
  std::vector<index_t> variables() const;

  /** Structurally nonzero Hessian positions (both symmetric halves). */
  void hessian_pattern(std::set<std::pair<index_t, index_t>>& out) const;

  /** Largest variable index referenced, or -1 for a constant expression. */
  index_t max_variable() const;

 private:
  scalar_t constant_ = 0.0;
  std::vector<Lin> linear_;
  std::vector<Quad> quads_;
  std::vector<Cubic> cubics_;
  std::vector<Trig> trigs_;
};

Expr operator+(Expr lhs, const Expr& rhs);
Expr operator-(Expr lhs, const Expr& rhs);
Expr operator*(scalar_t factor, Expr expr);
Expr operator-(Expr expr);

}  // namespace opfgap
