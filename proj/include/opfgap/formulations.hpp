#pragma once

#include <set>
#include <utility>
#include <vector>

#include "opfgap/network.hpp"
#include "opfgap/nlp.hpp"
#include "opfgap/scenario.hpp"
#include "opfgap/solver.hpp"

namespace opfgap::formulations {

/** Demand multiplier applied to a subset of loads. An empty id set scales
 *  every conventional load; injection-type loads are never scaled. */
struct LoadScaling {
  scalar_t t = 1.0;
  std::set<int> load_ids;

  scalar_t factor(const Load& load) const {
    if (load.is_injection) return 1.0;
    if (!load_ids.empty() && load_ids.find(load.id) == load_ids.end()) return 1.0;
    return t;
  }
};

/** Deterministic variable map shared by all model builders. Offsets are -1
 *  when a block is absent from the model. Branch flow variables come in
 *  groups of four: from-side P, Q then to-side P, Q. */
struct Layout {
  index_t n_bus = 0, n_gen = 0, n_branch = 0, n_pair = 0;
  index_t vm0 = -1, va0 = -1;                    // polar blocks
  index_t wnn0 = -1, wr0 = -1, wi0 = -1;         // lifted product blocks
  index_t vv0 = -1, ch0 = -1, sh0 = -1;          // QC auxiliary blocks
  index_t pg0 = -1, qg0 = -1, flow0 = -1;

  /** Canonical unordered bus pairs (positions), lower bus id first; parallel
   *  branches share one entry. */
  std::vector<std::pair<index_t, index_t>> pairs;
  std::vector<index_t> branch_pair;   // branch -> pair position
  std::vector<scalar_t> branch_sign;  // +1 when the from bus is the canonical one
  std::vector<scalar_t> pair_angle;   // tightest angle bound among the pair's branches

  index_t vm(index_t bus) const { return vm0 + bus; }
  index_t va(index_t bus) const { return va0 + bus; }
  index_t wnn(index_t bus) const { return wnn0 + bus; }
  index_t wr(index_t pair) const { return wr0 + pair; }
  index_t wi(index_t pair) const { return wi0 + pair; }
  index_t vv(index_t pair) const { return vv0 + pair; }
  index_t ch(index_t pair) const { return ch0 + pair; }
  index_t sh(index_t pair) const { return sh0 + pair; }
  index_t pg(index_t gen) const { return pg0 + gen; }
  index_t qg(index_t gen) const { return qg0 + gen; }
  index_t pf(index_t br) const { return flow0 + 4 * br; }
  index_t qf(index_t br) const { return flow0 + 4 * br + 1; }
  index_t pt(index_t br) const { return flow0 + 4 * br + 2; }
  index_t qt(index_t br) const { return flow0 + 4 * br + 3; }
};

struct BuiltModel {
  NlpProblem problem;
  Layout layout;
  ModelKind model = ModelKind::ac;
};

/** Exact polar optimal power flow: voltage bounds, dispatch boxes, apparent
 *  power ratings on both branch ends, angle-difference limits, trigonometric
 *  flow definitions and load-scaled bus balances with shunt withdrawal. The
 *  reference angle (lowest-id generator bus) is pinned to zero. */
BuiltModel build_ac_opf(const Network& net, const LoadScaling& scaling = {});

/** Second-order cone relaxation in the lifted voltage-product space: flows
 *  and balances become linear, one rotated-cone row couples each bus pair. */
BuiltModel build_socp(const Network& net, const LoadScaling& scaling = {});

/** Semidefinite relaxation enforced through principal minors. Order 2 keeps
 *  exactly the pairwise minors (the SOCP feasible set); order 3 adds all
 *  seven principal minors of every 3-clique in the pair graph. */
BuiltModel build_sdp(const Network& net, const LoadScaling& scaling = {}, int minor_order = 2);

/** Quadratic-convex relaxation: polar variables tied to the lifted space by
 *  trigonometric envelopes, McCormick products and the square envelope, on
 *  top of the full cone and angle rows of the SOCP. */
BuiltModel build_qc(const Network& net, const LoadScaling& scaling = {});

/** AC feasibility restoration (model 4): the polar constraint set with the
 *  squared L2 distance of the dispatch to a target as objective. */
BuiltModel build_load_flow(const Network& net, const LoadScaling& scaling,
                           const vector_t& target_pg, const vector_t& target_qg);

struct AcSolution {
  vector_t vm, va;  // per bus, network order
  vector_t pg, qg;  // per generator
  matrix_t flows;   // n_branch x 4: pf, qf, pt, qt
  scalar_t objective = 0.0;      // solver objective of the model solved
  scalar_t dispatch_cost = 0.0;  // generation cost of the extracted dispatch
  SolveStatus status = SolveStatus::numeric_failure;
  index_t iterations = 0;
  scalar_t solve_time_s = 0.0;
};

struct RelaxSolution {
  ModelKind model = ModelKind::socp;
  vector_t w_nn;        // per bus
  vector_t w_re, w_im;  // per canonical pair
  std::vector<std::pair<index_t, index_t>> pairs;
  vector_t pg, qg;
  matrix_t flows;
  scalar_t objective = 0.0;
  SolveStatus status = SolveStatus::numeric_failure;
  index_t iterations = 0;
  scalar_t solve_time_s = 0.0;

  /** Voltage magnitudes implied by the lifted diagonal. */
  vector_t vm_from_w() const { return w_nn.cwiseMax(0.0).cwiseSqrt(); }
};

AcSolution extract_ac_solution(const Network& net, const BuiltModel& model,
                               const SolveOutcome& outcome);
RelaxSolution extract_relax_solution(const Network& net, const BuiltModel& model,
                                     const SolveOutcome& outcome);

/** Branch flows implied by a polar voltage profile, n_branch x 4. */
matrix_t ac_branch_flows(const Network& net, const vector_t& vm, const vector_t& va);

/** Worst violation (per unit) of the polar constraint set at a candidate
 *  operating point: voltage and dispatch boxes, ratings, angle limits and
 *  bus balances with flows recomputed from the voltages. */
scalar_t evaluate_feasibility(const Network& net, const LoadScaling& scaling, const vector_t& vm,
                              const vector_t& va, const vector_t& pg, const vector_t& qg);

struct CensusOptions {
  scalar_t eps_vmag = 1e-4;  // absolute, per unit
  scalar_t eps_flow = 1e-3;  // relative to the rating
  /** Census branches against their current ratings where present instead of
   *  the apparent-power rating. */
  bool current_limits = false;
};

struct BindingCensus {
  scalar_t pct_vmag = 0.0;  // share of buses at a voltage bound, percent
  scalar_t pct_flow = 0.0;  // share of branches at their rating, percent
  index_t n_vmag = 0, n_flow = 0;
};

BindingCensus binding_census(const Network& net, const vector_t& vm, const matrix_t& flows,
                             const CensusOptions& options = {});
BindingCensus binding_census(const Network& net, const AcSolution& sol,
                             const CensusOptions& options = {});
BindingCensus binding_census(const Network& net, const RelaxSolution& sol,
                             const CensusOptions& options = {});

}  // namespace opfgap::formulations
