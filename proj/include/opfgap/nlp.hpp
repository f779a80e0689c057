#pragma once

#include <string>
#include <vector>

#include "opfgap/expr.hpp"

namespace opfgap {

/** Variable descriptor. Bounds may coincide (fixed variable) and may be
 *  infinite (±kUnbounded). */
struct Variable {
  std::string name;
  scalar_t lower = 0.0;
  scalar_t upper = 0.0;
  scalar_t init = 0.0;
};

constexpr scalar_t kUnbounded = 1e20;

/** Constraint expression; equalities read expr == 0, inequalities expr <= 0. */
struct Constraint {
  std::string name;
  Expr expr;
};

/** Solver-agnostic smooth NLP. Derivative sparsity is implied by the term
 *  structure of each expression and is therefore always exact. */
struct NlpProblem {
  std::string tag;  // formulation name plus load factor, e.g. "socp t=1.25"
  std::vector<Variable> variables;
  Expr objective;
  std::vector<Constraint> equalities;
  std::vector<Constraint> inequalities;

  /** True when objective and all constraints are convex by construction
   *  (linear equalities, convex quadratic/conic inequalities). A minimizer
   *  of constraint violation then certifies infeasibility globally. */
  bool convex = false;

  index_t num_vars() const { return static_cast<index_t>(variables.size()); }
  vector_t initial_point() const;
  index_t variable_index(const std::string& name) const;  // throws if absent
  const Constraint* find_equality(const std::string& name) const;
  const Constraint* find_inequality(const std::string& name) const;

  /** Bounds are ordered, initial points lie inside them, and every expression
   *  references declared variables only. Throws ValidationError. */
  void validate() const;
};

}  // namespace opfgap
