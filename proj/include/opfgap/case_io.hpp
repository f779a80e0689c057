#pragma once

#include <optional>
#include <string>
#include <vector>

#include "opfgap/network.hpp"
#include "opfgap/scenario.hpp"

namespace opfgap::case_io {

/** Parse matrix-text case data (see docs/case-format.md). Out-of-service
 *  rows are dropped; quantities are normalized to per-unit on the case base. */
Network parse_case(const std::string& text);
Network parse_case_file(const std::string& path);

/** Render a network back to case text. parse(write(n)) is semantically equal
 *  to n, and write∘parse is a byte fixpoint from the first normalization on. */
std::string write_case(const Network& net, const std::string& name = "mpc_case");
void write_case_file(const Network& net, const std::string& path,
                     const std::string& name = "mpc_case");

/** Parse whitespace-separated key=value scenario text; unknown keys throw. */
ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec parse_scenario_file(const std::string& path);

/** One row of the stable result schema; empty optionals render as empty cells. */
struct ResultRow {
  scalar_t t = 0.0;
  std::string model;
  std::string status;
  std::optional<scalar_t> objective;
  std::optional<scalar_t> gap_pct;
  std::optional<int> iters;
  std::optional<scalar_t> solve_time_s;
  std::optional<scalar_t> pct_binding_vmag;
  std::optional<scalar_t> pct_binding_flow;
  std::optional<scalar_t> recovered_objective;
  std::optional<scalar_t> recovered_gap_pct;
  std::optional<scalar_t> recovery_dispatch_distance;
};

extern const char* const kResultsHeader;

std::string write_results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

/** Shortest decimal rendering that reparses to the same double at the
 *  precision used across all writers. */
std::string format_number(scalar_t value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace opfgap::case_io
