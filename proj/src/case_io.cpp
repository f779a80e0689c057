#include "opfgap/case_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace opfgap::case_io {

namespace {

constexpr scalar_t kHalfPi = 1.5707963267948966;
constexpr scalar_t kDegToRad = 0.017453292519943295;  // pi / 180

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg);
}

struct Section {
  std::vector<std::vector<scalar_t>> rows;
  std::size_t line = 0;  // 1-based line of the section header
};

/** Case text reduced to baseMVA plus named numeric matrices. */
struct RawCase {
  std::optional<scalar_t> base_mva;
  std::map<std::string, Section> sections;
};

class Scanner {
 public:
  explicit Scanner(const std::string& text) : text_(text) {}

  RawCase scan() {
    RawCase raw;
    while (skip_irrelevant()) {
      const std::size_t at_line = line_;
      const std::string name = read_identifier_path();
      skip_ws();
      if (!consume('=')) {
        continue;  // bare expression; not an assignment we care about
      }
      skip_ws();
      if (name == "mpc.baseMVA") {
        raw.base_mva = read_number("baseMVA");
        skip_ws();
        consume(';');
      } else if (peek() == '[') {
        Section sec = read_matrix();
        sec.line = at_line;
        const std::string key = name.rfind("mpc.", 0) == 0 ? name.substr(4) : name;
        if (!raw.sections.emplace(key, std::move(sec)).second) {
          fail(at_line, "duplicate section '" + key + "'");
        }
      } else {
        skip_rhs();  // strings, scalars and cell arrays we do not model
      }
    }
    return raw;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void advance() {
    if (text_[pos_] == '\n') ++line_;
    ++pos_;
  }

  bool consume(char c) {
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      const char c = peek();
      if (c == '%') {  // comment to end of line
        while (pos_ < text_.size() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
        advance();
      } else {
        break;
      }
    }
  }

  /** Advance to the next identifier start; false at end of text. */
  bool skip_irrelevant() {
    while (pos_ < text_.size()) {
      skip_ws();
      if (pos_ >= text_.size()) return false;
      const char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return true;
      advance();
    }
    return false;
  }

  std::string read_identifier_path() {
    std::string out;
    while (pos_ < text_.size()) {
      const char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        out += c;
        advance();
      } else {
        break;
      }
    }
    return out;
  }

  scalar_t read_number(const std::string& what) {
    skip_ws();
    const std::size_t start = pos_;
    if (peek() == '+' || peek() == '-') advance();
    while (pos_ < text_.size()) {
      const char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
          ((c == '+' || c == '-') && (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))) {
        advance();
      } else {
        break;
      }
    }
    scalar_t value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || first == last) {
      fail(line_, "expected a number for " + what);
    }
    return value;
  }

  Section read_matrix() {
    Section sec;
    const std::size_t open_line = line_;
    advance();  // '['
    std::vector<scalar_t> row;
    while (true) {
      // Newlines are row separators in matrix context, so handle them before
      // the generic whitespace skip.
      while (pos_ < text_.size()) {
        const char c = peek();
        if (c == '%') {
          while (pos_ < text_.size() && peek() != '\n') advance();
        } else if (c == '\n' || c == ';') {
          if (!row.empty()) {
            sec.rows.push_back(std::move(row));
            row.clear();
          }
          advance();
        } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
          advance();
        } else {
          break;
        }
      }
      if (pos_ >= text_.size()) fail(open_line, "unterminated matrix");
      if (peek() == ']') {
        advance();
        if (!row.empty()) sec.rows.push_back(std::move(row));
        skip_ws();
        consume(';');
        return sec;
      }
      row.push_back(read_number("matrix entry"));
    }
  }

  void skip_rhs() {
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = peek();
      if (c == '%') {
        while (pos_ < text_.size() && peek() != '\n') advance();
        continue;
      }
      if (c == '{' || c == '[' || c == '(') ++depth;
      if (c == '}' || c == ']' || c == ')') --depth;
      if (c == '\'') {  // string literal
        advance();
        while (pos_ < text_.size() && peek() != '\'') advance();
      }
      if (c == ';' && depth <= 0) {
        advance();
        return;
      }
      advance();
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

const Section& require_section(const RawCase& raw, const std::string& name) {
  auto it = raw.sections.find(name);
  if (it == raw.sections.end()) throw ParseError("missing required section '" + name + "'");
  return it->second;
}

void require_cols(const Section& sec, std::size_t row, std::size_t min_cols, const char* what) {
  if (sec.rows[row].size() < min_cols) {
    fail(sec.line, std::string(what) + " row " + std::to_string(row + 1) + " has " +
                       std::to_string(sec.rows[row].size()) + " columns, needs at least " +
                       std::to_string(min_cols));
  }
}

int as_int(scalar_t v, std::size_t line, const char* what) {
  const scalar_t r = std::round(v);
  if (std::abs(v - r) > 1e-9 || std::abs(r) > 2e9) {
    fail(line, std::string(what) + " must be an integer, got " + std::to_string(v));
  }
  return static_cast<int>(r);
}

/** Aligned one-column extension (one value per row of the parent table). */
std::vector<scalar_t> aligned_column(const RawCase& raw, const std::string& name,
                                     std::size_t parent_rows) {
  auto it = raw.sections.find(name);
  if (it == raw.sections.end()) return {};
  const Section& sec = it->second;
  if (sec.rows.size() != parent_rows) {
    fail(sec.line, "section '" + name + "' must have one row per parent row (" +
                       std::to_string(parent_rows) + "), has " + std::to_string(sec.rows.size()));
  }
  std::vector<scalar_t> out;
  out.reserve(parent_rows);
  for (std::size_t i = 0; i < sec.rows.size(); ++i) {
    require_cols(sec, i, 1, name.c_str());
    out.push_back(sec.rows[i][0]);
  }
  return out;
}

FuelType fuel_from_code(int code, std::size_t line) {
  switch (code) {
    case 0: return FuelType::solar;
    case 1: return FuelType::wind;
    case 2: return FuelType::thermal;
    case 3: return FuelType::hydro;
    case 4: return FuelType::nuclear;
    default: fail(line, "unknown fuel code " + std::to_string(code));
  }
}

int fuel_code(FuelType fuel) {
  switch (fuel) {
    case FuelType::solar: return 0;
    case FuelType::wind: return 1;
    case FuelType::thermal: return 2;
    case FuelType::hydro: return 3;
    case FuelType::nuclear: return 4;
  }
  throw ValidationError("unknown fuel enum value");
}

}  // namespace

std::string format_number(scalar_t value) {
  if (value == 0.0) return "0";  // avoid "-0"
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  return buf;
}

Network parse_case(const std::string& text) {
  RawCase raw = Scanner(text).scan();
  if (!raw.base_mva) throw ParseError("missing mpc.baseMVA");
  const scalar_t base = *raw.base_mva;
  if (!(base > 0.0)) throw ParseError("baseMVA must be positive");

  const Section& bus_sec = require_section(raw, "bus");
  const Section& gen_sec = require_section(raw, "gen");
  const Section& branch_sec = require_section(raw, "branch");

  std::vector<Bus> buses;
  std::vector<Load> loads;
  std::vector<Shunt> shunts;
  const bool has_load_detail = raw.sections.count("load_detail") > 0;
  const bool has_shunt_detail = raw.sections.count("shunt_detail") > 0;
  for (std::size_t i = 0; i < bus_sec.rows.size(); ++i) {
    require_cols(bus_sec, i, 13, "bus");
    const auto& r = bus_sec.rows[i];
    const int id = as_int(r[0], bus_sec.line, "bus id");
    const int type = as_int(r[1], bus_sec.line, "bus type");
    if (type == 4) continue;  // isolated bus: out of service
    Bus b;
    b.id = id;
    b.vmax = r[11];
    b.vmin = r[12];
    if (r[7] > 0.0) b.setpoint_vm = r[7];
    buses.push_back(b);
    if (!has_load_detail && (r[2] != 0.0 || r[3] != 0.0)) {
      loads.push_back({id, id, r[2] / base, r[3] / base, r[2] < 0.0});
    }
    if (!has_shunt_detail && (r[4] != 0.0 || r[5] != 0.0)) {
      shunts.push_back({id, id, r[4] / base, r[5] / base});
    }
  }

  if (has_load_detail) {
    const Section& sec = raw.sections.at("load_detail");
    for (std::size_t i = 0; i < sec.rows.size(); ++i) {
      require_cols(sec, i, 5, "load_detail");
      const auto& r = sec.rows[i];
      loads.push_back({as_int(r[0], sec.line, "load id"), as_int(r[1], sec.line, "load bus"),
                       r[2] / base, r[3] / base, r[4] != 0.0});
    }
  }
  if (has_shunt_detail) {
    const Section& sec = raw.sections.at("shunt_detail");
    for (std::size_t i = 0; i < sec.rows.size(); ++i) {
      require_cols(sec, i, 4, "shunt_detail");
      const auto& r = sec.rows[i];
      shunts.push_back({as_int(r[0], sec.line, "shunt id"), as_int(r[1], sec.line, "shunt bus"),
                        r[2] / base, r[3] / base});
    }
  }

  const auto gen_ids = aligned_column(raw, "gen_id", gen_sec.rows.size());
  const auto fuel_codes = aligned_column(raw, "gen_fuel", gen_sec.rows.size());
  const Section* cost_sec = nullptr;
  if (auto it = raw.sections.find("gencost"); it != raw.sections.end()) {
    cost_sec = &it->second;
    if (cost_sec->rows.size() != gen_sec.rows.size()) {
      fail(cost_sec->line, "gencost must have one row per generator row");
    }
  }

  std::vector<Generator> gens;
  for (std::size_t i = 0; i < gen_sec.rows.size(); ++i) {
    require_cols(gen_sec, i, 10, "gen");
    const auto& r = gen_sec.rows[i];
    if (r[7] <= 0.0) continue;  // out of service
    Generator g;
    g.id = gen_ids.empty() ? static_cast<int>(i) + 1 : as_int(gen_ids[i], gen_sec.line, "gen id");
    g.bus = as_int(r[0], gen_sec.line, "gen bus");
    g.qmax = r[3] / base;
    g.qmin = r[4] / base;
    g.pmax = r[8] / base;
    g.pmin = r[9] / base;
    g.fuel = fuel_codes.empty()
                 ? FuelType::thermal
                 : fuel_from_code(as_int(fuel_codes[i], gen_sec.line, "fuel code"), gen_sec.line);
    if (cost_sec != nullptr) {
      require_cols(*cost_sec, i, 4, "gencost");
      const auto& c = cost_sec->rows[i];
      const int model = as_int(c[0], cost_sec->line, "cost model");
      if (model != 2) fail(cost_sec->line, "only polynomial cost rows (model 2) are supported");
      const int n = as_int(c[3], cost_sec->line, "cost term count");
      if (n < 1 || n > 3) fail(cost_sec->line, "cost polynomial must have 1 to 3 terms");
      require_cols(*cost_sec, i, 4 + static_cast<std::size_t>(n), "gencost");
      // Highest order first; per-MW coefficients scale onto the per-unit base.
      scalar_t coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
      for (int k = 0; k < n; ++k) coef[3 - n + k] = c[4 + static_cast<std::size_t>(k)];
      g.cost_c2 = coef[0] * base * base;
      g.cost_c1 = coef[1] * base;
      g.cost_c0 = coef[2];
    } else {
      const FuelCost fc = default_fuel_cost(g.fuel);
      g.cost_c2 = fc.c2;
      g.cost_c1 = fc.c1;
      g.cost_c0 = fc.c0;
    }
    gens.push_back(g);
  }

  const auto branch_ids = aligned_column(raw, "branch_id", branch_sec.rows.size());
  const auto branch_imax = aligned_column(raw, "branch_imax", branch_sec.rows.size());
  std::vector<Branch> branches;
  for (std::size_t i = 0; i < branch_sec.rows.size(); ++i) {
    require_cols(branch_sec, i, 11, "branch");
    const auto& r = branch_sec.rows[i];
    if (r[10] <= 0.0) continue;  // out of service
    Branch br;
    br.id = branch_ids.empty() ? static_cast<int>(i) + 1
                               : as_int(branch_ids[i], branch_sec.line, "branch id");
    br.from_bus = as_int(r[0], branch_sec.line, "branch from bus");
    br.to_bus = as_int(r[1], branch_sec.line, "branch to bus");
    br.r = r[2];
    br.x = r[3];
    br.charge_b = r[4];
    br.s_max = r[5] > 0.0 ? r[5] / base : 0.0;
    br.tap = r[8] > 0.0 ? r[8] : 1.0;
    br.shift = r[9] * kDegToRad;
    br.angle_max = kHalfPi;
    if (r.size() >= 13) {
      const scalar_t angmax_deg = r[12];
      if (angmax_deg > 0.0 && angmax_deg <= 90.0) br.angle_max = angmax_deg * kDegToRad;
    }
    if (!branch_imax.empty() && branch_imax[i] > 0.0) br.i_max = branch_imax[i];
    branches.push_back(br);
  }

  return Network(base, std::move(buses), std::move(branches), std::move(gens), std::move(loads),
                 std::move(shunts));
}

Network parse_case_file(const std::string& path) {
  return parse_case(read_text_file(path));
}

namespace {

void write_row(std::string& out, const std::vector<std::string>& cells) {
  for (const auto& c : cells) {
    out += '\t';
    out += c;
  }
  out += ";\n";
}

std::string num(scalar_t v) { return format_number(v); }

}  // namespace

std::string write_case(const Network& net, const std::string& name) {
  const scalar_t base = net.base_mva();

  // Canonical bus-table encodings hold when ids mirror positions or host
  // buses; anything richer moves to a detail section.
  bool loads_canonical = true;
  std::map<int, const Load*> load_by_bus;
  for (const auto& l : net.loads()) {
    if (l.id != l.bus || !load_by_bus.emplace(l.bus, &l).second ||
        l.is_injection != (l.p < 0.0)) {
      loads_canonical = false;
    }
  }
  bool shunts_canonical = true;
  std::map<int, const Shunt*> shunt_by_bus;
  for (const auto& s : net.shunts()) {
    if (s.id != s.bus || !shunt_by_bus.emplace(s.bus, &s).second) shunts_canonical = false;
  }

  // Reference bus: host of the lowest-id generator (bus type 3 below).
  std::set<int> gen_buses;
  int ref_bus = net.buses().front().id;
  bool have_gen = false;
  int lowest_gen = 0;
  for (const auto& g : net.generators()) {
    gen_buses.insert(g.bus);
    if (!have_gen || g.id < lowest_gen) {
      have_gen = true;
      lowest_gen = g.id;
      ref_bus = g.bus;
    }
  }

  std::string out;
  out += "function mpc = " + name + "\n";
  out += "mpc.version = '2';\n\n";
  out += "%% system MVA base\n";
  out += "mpc.baseMVA = " + num(base) + ";\n\n";

  out += "%% bus data\n";
  out += "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out += "mpc.bus = [\n";
  for (const auto& b : net.buses()) {
    scalar_t pd = 0.0, qd = 0.0, gs = 0.0, bs = 0.0;
    if (loads_canonical) {
      if (auto it = load_by_bus.find(b.id); it != load_by_bus.end()) {
        pd = it->second->p * base;
        qd = it->second->q * base;
      }
    }
    if (shunts_canonical) {
      if (auto it = shunt_by_bus.find(b.id); it != shunt_by_bus.end()) {
        gs = it->second->gs * base;
        bs = it->second->bs * base;
      }
    }
    const int type = b.id == ref_bus ? 3 : (gen_buses.count(b.id) ? 2 : 1);
    write_row(out, {num(b.id), num(type), num(pd), num(qd), num(gs), num(bs), "1",
                    num(b.setpoint_vm.value_or(0.0)), "0", "0", "1", num(b.vmax), num(b.vmin)});
  }
  out += "];\n\n";

  out += "%% generator data\n";
  out += "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out += "mpc.gen = [\n";
  for (const auto& g : net.generators()) {
    write_row(out, {num(g.bus), "0", "0", num(g.qmax * base), num(g.qmin * base), "1", num(base),
                    "1", num(g.pmax * base), num(g.pmin * base)});
  }
  out += "];\n\n";

  out += "%% branch data\n";
  out += "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  out += "mpc.branch = [\n";
  for (const auto& br : net.branches()) {
    std::string angmin = "-360", angmax = "360";
    if (br.angle_max < kHalfPi - 1e-12) {
      const scalar_t deg = br.angle_max / kDegToRad;
      angmax = num(deg);
      angmin = num(-deg);
    }
    write_row(out, {num(br.from_bus), num(br.to_bus), num(br.r), num(br.x), num(br.charge_b),
                    num(br.s_max * base), "0", "0", num(br.tap), num(br.shift / kDegToRad), "1",
                    angmin, angmax});
  }
  out += "];\n\n";

  out += "%% generator cost data\n";
  out += "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\n";
  out += "mpc.gencost = [\n";
  for (const auto& g : net.generators()) {
    write_row(out, {"2", "0", "0", "3", num(g.cost_c2 / (base * base)), num(g.cost_c1 / base),
                    num(g.cost_c0)});
  }
  out += "];\n";

  bool nontrivial_fuel = false;
  for (const auto& g : net.generators()) nontrivial_fuel |= g.fuel != FuelType::thermal;
  if (nontrivial_fuel) {
    out += "\n%% fuel codes: 0 solar, 1 wind, 2 thermal, 3 hydro, 4 nuclear\n";
    out += "mpc.gen_fuel = [\n";
    for (const auto& g : net.generators()) write_row(out, {num(fuel_code(g.fuel))});
    out += "];\n";
  }

  bool plain_gen_ids = true;
  for (std::size_t i = 0; i < net.generators().size(); ++i) {
    plain_gen_ids &= net.generators()[i].id == static_cast<int>(i) + 1;
  }
  if (!plain_gen_ids) {
    out += "\nmpc.gen_id = [\n";
    for (const auto& g : net.generators()) write_row(out, {num(g.id)});
    out += "];\n";
  }

  bool plain_branch_ids = true;
  bool any_imax = false;
  for (std::size_t i = 0; i < net.branches().size(); ++i) {
    plain_branch_ids &= net.branches()[i].id == static_cast<int>(i) + 1;
    any_imax |= net.branches()[i].i_max.has_value();
  }
  if (!plain_branch_ids) {
    out += "\nmpc.branch_id = [\n";
    for (const auto& br : net.branches()) write_row(out, {num(br.id)});
    out += "];\n";
  }
  if (any_imax) {
    out += "\n%% per-unit current limits (0 = none); census only\n";
    out += "mpc.branch_imax = [\n";
    for (const auto& br : net.branches()) write_row(out, {num(br.i_max.value_or(0.0))});
    out += "];\n";
  }

  if (!loads_canonical) {
    out += "\n%% loads: id, bus, P (MW), Q (MVAr), fixed-injection flag\n";
    out += "mpc.load_detail = [\n";
    for (const auto& l : net.loads()) {
      write_row(out, {num(l.id), num(l.bus), num(l.p * base), num(l.q * base),
                      l.is_injection ? "1" : "0"});
    }
    out += "];\n";
  }
  if (!shunts_canonical) {
    out += "\n%% shunts: id, bus, Gs (MW at 1 pu), Bs (MVAr at 1 pu)\n";
    out += "mpc.shunt_detail = [\n";
    for (const auto& s : net.shunts()) {
      write_row(out, {num(s.id), num(s.bus), num(s.gs * base), num(s.bs * base)});
    }
    out += "];\n";
  }

  return out;
}

void write_case_file(const Network& net, const std::string& path, const std::string& name) {
  write_text_file(path, write_case(net, name));
}

ScenarioSpec parse_scenario(const std::string& text) {
  ScenarioSpec spec;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::string, std::string>> pairs;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) {
        fail(line_no, "expected key=value, got '" + tok + "'");
      }
      pairs.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
  }

  auto as_number = [](const std::string& key, const std::string& value) -> scalar_t {
    scalar_t out = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
      throw ParseError("scenario key '" + key + "' needs a number, got '" + value + "'");
    }
    return out;
  };

  for (const auto& [key, value] : pairs) {
    if (key == "t_start") {
      spec.t_start = as_number(key, value);
    } else if (key == "t_end") {
      spec.t_end = as_number(key, value);
    } else if (key == "step") {
      spec.base_step = as_number(key, value);
    } else if (key == "refine_step") {
      spec.refine_step = as_number(key, value);
    } else if (key == "refine_trigger") {
      spec.refine_trigger = as_number(key, value);
    } else if (key == "gen_capacity_factor") {
      spec.gen_capacity_factor = as_number(key, value);
    } else if (key == "loads") {
      spec.loads = LoadSelector::parse(value);
    } else if (key == "models") {
      spec.models.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) spec.models.push_back(model_from_string(item));
    } else if (key == "recovery") {
      if (value == "true" || value == "1") {
        spec.recovery_enabled = true;
      } else if (value == "false" || value == "0") {
        spec.recovery_enabled = false;
      } else {
        throw ParseError("scenario key 'recovery' needs true/false, got '" + value + "'");
      }
    } else {
      throw ParseError("unknown scenario key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

ScenarioSpec parse_scenario_file(const std::string& path) {
  return parse_scenario(read_text_file(path));
}

const char* const kResultsHeader =
    "t,model,status,objective,gap_pct,iters,solve_time_s,pct_binding_vmag,pct_binding_flow,"
    "recovered_objective,recovered_gap_pct,recovery_dispatch_distance";

namespace {

std::string opt_num(const std::optional<scalar_t>& v) {
  return v ? format_number(*v) : std::string();
}

std::optional<scalar_t> parse_opt(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  scalar_t out = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    fail(line, "bad numeric cell '" + cell + "'");
  }
  return out;
}

}  // namespace

std::string write_results_csv(const std::vector<ResultRow>& rows) {
  std::string out = kResultsHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += format_number(r.t);
    out += ',' + r.model;
    out += ',' + r.status;
    out += ',' + opt_num(r.objective);
    out += ',' + opt_num(r.gap_pct);
    out += ',';
    if (r.iters) out += std::to_string(*r.iters);
    out += ',' + opt_num(r.solve_time_s);
    out += ',' + opt_num(r.pct_binding_vmag);
    out += ',' + opt_num(r.pct_binding_flow);
    out += ',' + opt_num(r.recovered_objective);
    out += ',' + opt_num(r.recovered_gap_pct);
    out += ',' + opt_num(r.recovery_dispatch_distance);
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty result file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw ParseError("unexpected result header: " + line);
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 11 && line.back() == ',') cells.emplace_back();  // getline drops a final empty
    if (cells.size() != 12) fail(line_no, "expected 12 cells, got " + std::to_string(cells.size()));
    ResultRow r;
    const auto t = parse_opt(cells[0], line_no);
    if (!t) fail(line_no, "missing load factor");
    r.t = *t;
    r.model = cells[1];
    r.status = cells[2];
    r.objective = parse_opt(cells[3], line_no);
    r.gap_pct = parse_opt(cells[4], line_no);
    if (const auto it = parse_opt(cells[5], line_no)) r.iters = static_cast<int>(*it);
    r.solve_time_s = parse_opt(cells[6], line_no);
    r.pct_binding_vmag = parse_opt(cells[7], line_no);
    r.pct_binding_flow = parse_opt(cells[8], line_no);
    r.recovered_objective = parse_opt(cells[9], line_no);
    r.recovered_gap_pct = parse_opt(cells[10], line_no);
    r.recovery_dispatch_distance = parse_opt(cells[11], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << text;
  if (!out.flush()) throw ParseError("failed writing '" + path + "'");
}

}  // namespace opfgap::case_io
