#include "opfgap/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "opfgap/formulations.hpp"

namespace opfgap::sweep {

using formulations::AcSolution;
using formulations::BuiltModel;
using formulations::LoadScaling;
using formulations::RelaxSolution;

scalar_t compute_gap(scalar_t ac_cost, scalar_t relax_cost) {
  if (!(ac_cost > 0.0)) {
    throw ValidationError("optimality gap undefined for nonpositive reference cost");
  }
  return 100.0 * (1.0 - relax_cost / ac_cost);
}

std::string to_string(PhaseLabel label) {
  switch (label) {
    case PhaseLabel::accurate: return "accurate";
    case PhaseLabel::bifurcated: return "bifurcated";
    case PhaseLabel::ac_diverged: return "ac_diverged";
    case PhaseLabel::relax_infeasible: return "relax_infeasible";
  }
  throw ValidationError("unknown phase label");
}

namespace {

BuiltModel build_model(const Network& net, ModelKind kind, const LoadScaling& scaling) {
  switch (kind) {
    case ModelKind::ac: return formulations::build_ac_opf(net, scaling);
    case ModelKind::qc: return formulations::build_qc(net, scaling);
    case ModelKind::socp: return formulations::build_socp(net, scaling);
    case ModelKind::sdp2: return formulations::build_sdp(net, scaling, 2);
    case ModelKind::sdp3: return formulations::build_sdp(net, scaling, 3);
  }
  throw ValidationError("unknown model enum value");
}

/** All requested formulations at one load factor; the AC row (when requested)
 *  is solved first so every relaxation can be scored against it. */
std::vector<SweepRecord> solve_point(const Network& net, const std::set<int>& load_ids, scalar_t t,
                                     const ScenarioSpec& spec, const SweepOptions& options) {
  const LoadScaling scaling{t, load_ids};
  const IpmSolver solver(options.solver);

  SweepRecord ac_rec;
  bool ac_solved = false;
  if (std::find(spec.models.begin(), spec.models.end(), ModelKind::ac) != spec.models.end()) {
    const BuiltModel model = formulations::build_ac_opf(net, scaling);
    const SolveOutcome out = solver.solve(model.problem);
    const AcSolution sol = formulations::extract_ac_solution(net, model, out);
    const auto census = formulations::binding_census(net, sol);
    ac_rec.t = t;
    ac_rec.status = out.status;
    ac_rec.objective = out.objective;
    ac_rec.iterations = out.iterations;
    ac_rec.solve_time_s = out.wall_time_s;
    ac_rec.pct_binding_vmag = census.pct_vmag;
    ac_rec.pct_binding_flow = census.pct_flow;
    ac_rec.infeasibility_proved = out.infeasibility_proved;
    ac_solved = true;
  }
  const bool ac_usable = ac_solved && ac_rec.status == SolveStatus::optimal && ac_rec.objective > 0.0;

  std::vector<SweepRecord> records;
  records.reserve(spec.models.size());
  for (ModelKind kind : spec.models) {
    if (kind == ModelKind::ac) {
      records.push_back(ac_rec);
      continue;
    }
    const BuiltModel model = build_model(net, kind, scaling);
    const SolveOutcome out = solver.solve(model.problem);
    const RelaxSolution sol = formulations::extract_relax_solution(net, model, out);
    const auto census = formulations::binding_census(net, sol);
    SweepRecord rec;
    rec.t = t;
    rec.model = kind;
    rec.status = out.status;
    rec.objective = out.objective;
    rec.iterations = out.iterations;
    rec.solve_time_s = out.wall_time_s;
    rec.pct_binding_vmag = census.pct_vmag;
    rec.pct_binding_flow = census.pct_flow;
    rec.infeasibility_proved = out.infeasibility_proved;
    if (ac_usable && rec.status == SolveStatus::optimal) {
      rec.gap_pct = compute_gap(ac_rec.objective, rec.objective);
    }
    if (spec.recovery_enabled && rec.status == SolveStatus::optimal) {
      const BuiltModel lf = formulations::build_load_flow(net, scaling, sol.pg, sol.qg);
      const SolveOutcome lf_out = solver.solve(lf.problem);
      if (lf_out.status == SolveStatus::optimal) {
        const AcSolution recovered = formulations::extract_ac_solution(net, lf, lf_out);
        rec.recovered_objective = recovered.dispatch_cost;
        // The load-flow objective is the squared dispatch distance.
        rec.recovery_dispatch_distance = std::sqrt(std::max(scalar_t(0), lf_out.objective));
        if (recovered.dispatch_cost > 0.0) {
          rec.recovered_gap_pct = compute_gap(recovered.dispatch_cost, rec.objective);
        }
      }
    }
    records.push_back(rec);
  }
  return records;
}

Network prepare_network(const Network& net, const ScenarioSpec& spec) {
  if (spec.gen_capacity_factor == 1.0) return net;
  return scale_generation_capacity(net, spec.gen_capacity_factor);
}

std::vector<scalar_t> base_grid(const ScenarioSpec& spec) {
  std::vector<scalar_t> ts;
  const scalar_t eps = 1e-9 * std::max<scalar_t>(1.0, std::abs(spec.t_end));
  for (index_t i = 0;; ++i) {
    const scalar_t t = spec.t_start + static_cast<scalar_t>(i) * spec.base_step;
    if (t >= spec.t_end - eps) break;
    ts.push_back(t);
  }
  ts.push_back(spec.t_end);
  return ts;
}

std::vector<scalar_t> interior_grid(scalar_t lo, scalar_t hi, scalar_t step) {
  std::vector<scalar_t> ts;
  const scalar_t eps = 1e-9 * std::max<scalar_t>(1.0, std::abs(hi));
  for (index_t i = 1;; ++i) {
    const scalar_t t = lo + static_cast<scalar_t>(i) * step;
    if (t >= hi - eps) break;
    ts.push_back(t);
  }
  return ts;
}

bool needs_refinement(const std::vector<SweepRecord>& lo, const std::vector<SweepRecord>& hi,
                      scalar_t trigger) {
  for (const SweepRecord& a : lo) {
    for (const SweepRecord& b : hi) {
      if (a.model != b.model) continue;
      if (a.status != b.status) return true;
      // A gap appearing or vanishing between rows with unchanged statuses can
      // only come through the AC partner, whose own status flip is caught on
      // the ac pair above.
      if (a.gap_pct && b.gap_pct && std::abs(*a.gap_pct - *b.gap_pct) >= trigger) return true;
    }
  }
  return false;
}

/** Evaluate all points, spreading them over a small worker pool; slot i of
 *  the result always belongs to ts[i], so the merge is order-independent. */
std::vector<std::vector<SweepRecord>> solve_points(const Network& net,
                                                   const std::set<int>& load_ids,
                                                   const std::vector<scalar_t>& ts,
                                                   const ScenarioSpec& spec,
                                                   const SweepOptions& options) {
  std::vector<std::vector<SweepRecord>> out(ts.size());
  const std::size_t workers =
      std::min<std::size_t>(std::max(1, options.workers), std::max<std::size_t>(ts.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      out[i] = solve_point(net, load_ids, ts[i], spec, options);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < ts.size() && !failed.load();
         i = next.fetch_add(1)) {
      try {
        out[i] = solve_point(net, load_ids, ts[i], spec, options);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void sort_records(std::vector<SweepRecord>& records) {
  std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
    if (a.t != b.t) return a.t < b.t;
    return static_cast<int>(a.model) < static_cast<int>(b.model);
  });
}

}  // namespace

std::vector<SweepRecord> run_point(const Network& net, scalar_t t, const ScenarioSpec& spec,
                                   const SweepOptions& options) {
  spec.validate();
  if (!(t > 0.0)) throw ValidationError("load factor must be positive");
  const Network prepared = prepare_network(net, spec);
  return solve_point(prepared, spec.loads.resolve(prepared), t, spec, options);
}

SweepResult run_sweep(const Network& net, const ScenarioSpec& spec, const SweepOptions& options) {
  spec.validate();
  const Network prepared = prepare_network(net, spec);
  const std::set<int> load_ids = spec.loads.resolve(prepared);

  const std::vector<scalar_t> base = base_grid(spec);
  const auto base_records = solve_points(prepared, load_ids, base, spec, options);

  std::vector<std::pair<scalar_t, scalar_t>> refined;
  std::vector<scalar_t> extra;
  for (std::size_t i = 0; i + 1 < base.size(); ++i) {
    if (!needs_refinement(base_records[i], base_records[i + 1], spec.refine_trigger)) continue;
    refined.emplace_back(base[i], base[i + 1]);
    const auto interior = interior_grid(base[i], base[i + 1], spec.refine_step);
    extra.insert(extra.end(), interior.begin(), interior.end());
  }
  const auto extra_records = solve_points(prepared, load_ids, extra, spec, options);

  SweepResult result;
  for (const auto& block : base_records) {
    result.records.insert(result.records.end(), block.begin(), block.end());
  }
  for (const auto& block : extra_records) {
    result.records.insert(result.records.end(), block.begin(), block.end());
  }
  sort_records(result.records);
  if (options.clock) {
    for (SweepRecord& rec : result.records) rec.solve_time_s = options.clock();
  }

  result.report = classify_phases(result.records, options.gap_threshold);
  result.report.refined = std::move(refined);
  return result;
}

TransitionReport classify_phases(const std::vector<SweepRecord>& records, scalar_t gap_threshold) {
  TransitionReport report;
  if (records.empty()) return report;

  std::vector<SweepRecord> sorted = records;
  sort_records(sorted);

  std::vector<std::pair<scalar_t, PhaseLabel>> labels;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const scalar_t t = sorted[i].t;
    const scalar_t eps = 1e-12 * std::max<scalar_t>(1.0, std::abs(t));
    std::size_t j = i;
    bool ac_ok = false;
    std::size_t n_relax = 0, n_relax_infeasible = 0;
    scalar_t max_gap = 0.0;
    for (; j < sorted.size() && std::abs(sorted[j].t - t) <= eps; ++j) {
      const SweepRecord& rec = sorted[j];
      if (rec.model == ModelKind::ac) {
        ac_ok = rec.status == SolveStatus::optimal;
      } else {
        ++n_relax;
        if (rec.status == SolveStatus::locally_infeasible) ++n_relax_infeasible;
        if (rec.gap_pct) max_gap = std::max(max_gap, *rec.gap_pct);
      }
    }
    PhaseLabel label = PhaseLabel::ac_diverged;
    if (n_relax > 0 && n_relax_infeasible == n_relax) {
      label = PhaseLabel::relax_infeasible;
    } else if (ac_ok) {
      label = max_gap >= gap_threshold ? PhaseLabel::bifurcated : PhaseLabel::accurate;
    }
    labels.emplace_back(t, label);
    i = j;
  }

  std::size_t run_start = 0;
  for (std::size_t k = 1; k <= labels.size(); ++k) {
    if (k < labels.size() && labels[k].second == labels[run_start].second) continue;
    report.intervals.push_back(
        {labels[run_start].first, labels[k - 1].first, labels[run_start].second});
    if (k < labels.size()) report.transition_points.push_back(labels[k].first);
    run_start = k;
  }
  for (std::size_t k = 1; k < report.intervals.size(); ++k) {
    const PhaseInterval& prev = report.intervals[k - 1];
    const PhaseInterval& cur = report.intervals[k];
    if (static_cast<int>(cur.label) < static_cast<int>(prev.label)) {
      report.grammar_violations.push_back("label regresses from " + to_string(prev.label) +
                                          " to " + to_string(cur.label) + " at t=" +
                                          case_io::format_number(cur.t_lo));
    }
  }
  return report;
}

case_io::ResultRow to_result_row(const SweepRecord& rec) {
  case_io::ResultRow row;
  row.t = rec.t;
  row.model = to_string(rec.model);
  row.status = to_string(rec.status);
  row.objective = rec.objective;
  row.gap_pct = rec.gap_pct;
  row.iters = static_cast<int>(rec.iterations);
  row.solve_time_s = rec.solve_time_s;
  row.pct_binding_vmag = rec.pct_binding_vmag;
  row.pct_binding_flow = rec.pct_binding_flow;
  row.recovered_objective = rec.recovered_objective;
  row.recovered_gap_pct = rec.recovered_gap_pct;
  row.recovery_dispatch_distance = rec.recovery_dispatch_distance;
  return row;
}

std::vector<case_io::ResultRow> to_result_rows(const std::vector<SweepRecord>& records) {
  std::vector<case_io::ResultRow> rows;
  rows.reserve(records.size());
  for (const SweepRecord& rec : records) rows.push_back(to_result_row(rec));
  return rows;
}

namespace {

SolveStatus status_from_string(const std::string& name) {
  for (SolveStatus s : {SolveStatus::optimal, SolveStatus::locally_infeasible,
                        SolveStatus::iteration_limit, SolveStatus::time_limit,
                        SolveStatus::numeric_failure}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown solve status '" + name + "'");
}

}  // namespace

SweepRecord from_result_row(const case_io::ResultRow& row) {
  SweepRecord rec;
  rec.t = row.t;
  rec.model = model_from_string(row.model);
  rec.status = status_from_string(row.status);
  rec.objective = row.objective.value_or(0.0);
  rec.gap_pct = row.gap_pct;
  rec.iterations = row.iters.value_or(0);
  rec.solve_time_s = row.solve_time_s.value_or(0.0);
  rec.pct_binding_vmag = row.pct_binding_vmag.value_or(0.0);
  rec.pct_binding_flow = row.pct_binding_flow.value_or(0.0);
  rec.recovered_objective = row.recovered_objective;
  rec.recovered_gap_pct = row.recovered_gap_pct;
  rec.recovery_dispatch_distance = row.recovery_dispatch_distance;
  return rec;
}

}  // namespace opfgap::sweep
