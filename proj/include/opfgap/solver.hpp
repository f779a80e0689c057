#pragma once

#include <functional>
#include <string>

#include "opfgap/nlp.hpp"

namespace opfgap {

struct SolverOptions {
  scalar_t kkt_tolerance = 1e-8;
  index_t max_iterations = 500;
  scalar_t initial_barrier = 0.1;
  scalar_t barrier_reduction = 0.2;  // multiplicative, in (0,1)
  scalar_t time_limit_s = 0.0;       // 0 disables the limit
  scalar_t regularization_floor = 1e-9;
  /** Optional per-iteration sink; receives one formatted line per iteration. */
  std::function<void(const std::string&)> log;
};

enum class SolveStatus { optimal, locally_infeasible, iteration_limit, time_limit, numeric_failure };

std::string to_string(SolveStatus status);

struct SolveOutcome {
  SolveStatus status = SolveStatus::numeric_failure;
  scalar_t objective = 0.0;       // objective at the returned point, any status
  scalar_t dual_objective = 0.0;  // objective minus complementarity mass
  vector_t x;
  vector_t slacks;        // one per inequality
  vector_t y_equality;    // equality multipliers
  vector_t y_inequality;  // inequality multipliers (nonnegative)
  vector_t z_lower;       // bound multipliers (nonnegative)
  vector_t z_upper;
  scalar_t kkt_error = 0.0;             // scaled, at exit
  scalar_t constraint_violation = 0.0;  // max-norm primal violation at exit
  /** Minimized L1 violation found by restoration when locally infeasible. */
  scalar_t infeasibility_measure = 0.0;
  /** True when the instance is convex, making local infeasibility global. */
  bool infeasibility_proved = false;
  index_t iterations = 0;
  scalar_t wall_time_s = 0.0;
};

/** Primal-dual interior-point solver for smooth sparse NLPs: slack
 *  reformulation of inequalities, log barrier on bounds and slacks, Newton
 *  steps on the condensed symmetric KKT system with inertia-corrected LDLt,
 *  fraction-to-the-boundary (tau = 0.995), Armijo backtracking on an L1
 *  merit function, and an elastic feasibility-restoration phase that doubles
 *  as the infeasibility detector. */
class IpmSolver {
 public:
  explicit IpmSolver(SolverOptions options = {});
  SolveOutcome solve(const NlpProblem& problem) const;

 private:
  SolverOptions options_;
};

/** Max relative error between analytic first derivatives (objective gradient
 *  and every constraint gradient) and central finite differences at a point;
 *  the step for coordinate i is 1e-6 * max(1, |x_i|). */
scalar_t check_derivatives(const NlpProblem& problem, const vector_t& point);

}  // namespace opfgap
