#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opfgap/case_io.hpp"
#include "opfgap/network.hpp"
#include "opfgap/scenario.hpp"
#include "opfgap/solver.hpp"

namespace opfgap::sweep {

/** 100 * (1 - relax_cost / ac_cost). Throws ValidationError when the
 *  reference cost is nonpositive (the gap is undefined there). */
scalar_t compute_gap(scalar_t ac_cost, scalar_t relax_cost);

/** One solved (t, model) cell. Objective, census and timing describe the
 *  point the solver returned whatever the status; gap_pct is set only on
 *  relaxation rows whose AC partner at the same t converged, and the
 *  recovery block only when the relaxation converged and the load-flow
 *  projection of its dispatch succeeded. */
struct SweepRecord {
  scalar_t t = 1.0;
  ModelKind model = ModelKind::ac;
  SolveStatus status = SolveStatus::numeric_failure;
  scalar_t objective = 0.0;
  std::optional<scalar_t> gap_pct;
  index_t iterations = 0;
  scalar_t solve_time_s = 0.0;
  scalar_t pct_binding_vmag = 0.0;
  scalar_t pct_binding_flow = 0.0;
  std::optional<scalar_t> recovered_objective;
  std::optional<scalar_t> recovered_gap_pct;          // 100*(1 - relax/recovered)
  std::optional<scalar_t> recovery_dispatch_distance;  // L2, per unit
  /** Local infeasibility upgraded to a certificate by convexity. */
  bool infeasibility_proved = false;
};

enum class PhaseLabel { accurate, bifurcated, ac_diverged, relax_infeasible };

std::string to_string(PhaseLabel label);

struct PhaseInterval {
  scalar_t t_lo = 0.0, t_hi = 0.0;  // closed span of grid points with one label
  PhaseLabel label = PhaseLabel::accurate;
};

struct TransitionReport {
  std::vector<PhaseInterval> intervals;     // partition the swept points in t order
  std::vector<scalar_t> transition_points;  // first grid point of each new label
  /** Base-grid intervals that were re-swept at refine_step. */
  std::vector<std::pair<scalar_t, scalar_t>> refined;
  /** Out-of-grammar label regressions (e.g. a gap region that closes again at
   *  higher t), reported verbatim rather than smoothed away. */
  std::vector<std::string> grammar_violations;
};

struct SweepOptions {
  SolverOptions solver;
  int workers = 1;
  /** Bifurcation line for phase labels, in percentage points. */
  scalar_t gap_threshold = 1.0;
  /** When set, replaces every record's wall time with clock() stamped in
   *  final record order, making artifacts reproducible across runs. */
  std::function<scalar_t()> clock;
};

/** Solve every requested formulation at one load factor: gaps against the AC
 *  row, binding census at each returned point, and (when enabled) the
 *  closest AC-feasible dispatch to each converged relaxation. Solver
 *  failures land in the status field; nothing throws past validation. */
std::vector<SweepRecord> run_point(const Network& net, scalar_t t, const ScenarioSpec& spec,
                                   const SweepOptions& options = {});

struct SweepResult {
  std::vector<SweepRecord> records;  // sorted by (t, model)
  TransitionReport report;
};

/** Evaluate the base grid t_start..t_end (end point snapped onto the grid),
 *  then re-sweep once at refine_step every base interval across which any
 *  model changes status or any gap jumps by at least refine_trigger. Points
 *  are independent and may run on `workers` threads; the merged result is
 *  identical for any worker count. */
SweepResult run_sweep(const Network& net, const ScenarioSpec& spec,
                      const SweepOptions& options = {});

/** Label every distinct t and collapse equal-label runs into intervals.
 *  Priority per point: all requested relaxations proven/locally infeasible ->
 *  relax_infeasible; else a converged AC row makes it accurate or bifurcated
 *  by the largest gap against gap_threshold; everything else (including
 *  sweeps that never requested ac) is ac_diverged. */
TransitionReport classify_phases(const std::vector<SweepRecord>& records,
                                 scalar_t gap_threshold = 1.0);

/** Lossless mapping onto the stable CSV schema and back. */
case_io::ResultRow to_result_row(const SweepRecord& rec);
std::vector<case_io::ResultRow> to_result_rows(const std::vector<SweepRecord>& records);
SweepRecord from_result_row(const case_io::ResultRow& row);

}  // namespace opfgap::sweep
