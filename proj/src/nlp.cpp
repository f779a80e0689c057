#include "opfgap/nlp.hpp"

#include <algorithm>

namespace opfgap {

vector_t NlpProblem::initial_point() const {
  vector_t x(num_vars());
  for (index_t i = 0; i < num_vars(); ++i) {
    x[i] = variables[static_cast<std::size_t>(i)].init;
  }
  return x;
}

index_t NlpProblem::variable_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return static_cast<index_t>(i);
  }
  throw ValidationError("problem '" + tag + "' has no variable '" + name + "'");
}

namespace {
const Constraint* find_by_name(const std::vector<Constraint>& items, const std::string& name) {
  auto it = std::find_if(items.begin(), items.end(),
                         [&name](const Constraint& c) { return c.name == name; });
  return it == items.end() ? nullptr : &*it;
}
}  // namespace

const Constraint* NlpProblem::find_equality(const std::string& name) const {
  return find_by_name(equalities, name);
}

const Constraint* NlpProblem::find_inequality(const std::string& name) const {
  return find_by_name(inequalities, name);
}

void NlpProblem::validate() const {
  const index_t n = num_vars();
  for (const auto& v : variables) {
    if (!(v.lower <= v.upper)) {
      throw ValidationError("variable '" + v.name + "' has crossed bounds");
    }
    if (v.init < v.lower - 1e-9 || v.init > v.upper + 1e-9) {
      throw ValidationError("variable '" + v.name + "' starts outside its bounds");
    }
  }
  auto check_expr = [n](const Expr& e, const std::string& where) {
    if (e.max_variable() >= n) {
      throw ValidationError(where + " references undeclared variable index " +
                            std::to_string(e.max_variable()));
    }
  };
  check_expr(objective, "objective of '" + tag + "'");
  for (const auto& c : equalities) check_expr(c.expr, "equality '" + c.name + "'");
  for (const auto& c : inequalities) check_expr(c.expr, "inequality '" + c.name + "'");
}

}  // namespace opfgap
