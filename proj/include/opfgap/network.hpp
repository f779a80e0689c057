#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "opfgap/types.hpp"

namespace opfgap {

enum class FuelType { solar, wind, thermal, hydro, nuclear };

std::string to_string(FuelType fuel);
FuelType fuel_from_string(const std::string& name);

/** Default quadratic cost coefficients (per-unit based) by fuel type,
 *  applied when a case file carries no cost data. */
struct FuelCost {
  scalar_t c2, c1, c0;
};
FuelCost default_fuel_cost(FuelType fuel);

struct Bus {
  int id = 0;
  scalar_t vmin = 0.9;  // p.u. voltage magnitude lower bound
  scalar_t vmax = 1.1;  // p.u. voltage magnitude upper bound
  std::optional<scalar_t> setpoint_vm;  // snapshot voltage magnitude, p.u.
};

/** Line or transformer on the standard pi model with an ideal tap/shift
 *  transformer at the from side. */
struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  scalar_t r = 0.0;         // p.u. series resistance
  scalar_t x = 0.0;         // p.u. series reactance
  scalar_t charge_b = 0.0;  // p.u. total line-charging susceptance
  scalar_t tap = 1.0;       // off-nominal turns ratio (1.0 for lines)
  scalar_t shift = 0.0;     // phase shift, radians (0.0 for lines)
  scalar_t s_max = 0.0;     // p.u. apparent-power limit; 0 means unlimited
  scalar_t angle_max = 0.0; // phase-angle-difference limit, radians, in (0, pi/2]
  std::optional<scalar_t> i_max;  // p.u. current limit; census only, never a constraint
};

struct Generator {
  int id = 0;
  int bus = 0;
  scalar_t pmin = 0.0, pmax = 0.0;  // p.u. active dispatch box
  scalar_t qmin = 0.0, qmax = 0.0;  // p.u. reactive dispatch box
  FuelType fuel = FuelType::thermal;
  scalar_t cost_c2 = 0.0;  // cost per p.u.^2
  scalar_t cost_c1 = 0.0;  // cost per p.u.
  scalar_t cost_c0 = 0.0;
};

struct Load {
  int id = 0;
  int bus = 0;
  scalar_t p = 0.0;  // p.u. active demand
  scalar_t q = 0.0;  // p.u. reactive demand
  bool is_injection = false;  // boundary injection, never scaled
};

struct Shunt {
  int id = 0;
  int bus = 0;
  scalar_t gs = 0.0;  // p.u. conductance
  scalar_t bs = 0.0;  // p.u. susceptance
};

/** In-memory power network in per-unit. Immutable after construction;
 *  mutation operations return fresh copies. */
class Network {
 public:
  Network(scalar_t base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
          std::vector<Generator> generators, std::vector<Load> loads,
          std::vector<Shunt> shunts);

  scalar_t base_mva() const { return base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Load>& loads() const { return loads_; }
  const std::vector<Shunt>& shunts() const { return shunts_; }

  /** Dense index of a bus id; throws ValidationError for unknown ids. */
  index_t bus_index(int bus_id) const;
  const Bus& bus(int bus_id) const { return buses_[static_cast<std::size_t>(bus_index(bus_id))]; }

  index_t num_buses() const { return static_cast<index_t>(buses_.size()); }
  index_t num_branches() const { return static_cast<index_t>(branches_.size()); }
  index_t num_generators() const { return static_cast<index_t>(generators_.size()); }

 private:
  void validate() const;

  scalar_t base_mva_ = 0.0;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  std::vector<Shunt> shunts_;
  std::unordered_map<int, index_t> bus_index_;
};

/** Series admittance 1/(r + jx). Rejects degenerate impedance r = x = 0. */
complex_t branch_admittance(const Branch& branch);

/** Quadratic dispatch cost c2 p^2 + c1 p + c0; evaluable outside bounds. */
scalar_t generation_cost(const Generator& gen, scalar_t p);

/** Total objective cost of an active dispatch, p.u., summed over generators. */
scalar_t total_generation_cost(const Network& net, const vector_t& pg);

/** Ids of the k scalable loads whose host bus has the smallest snapshot
 *  voltage magnitude; ties broken by ascending load id. */
std::set<int> select_lowest_voltage_loads(const Network& net, std::size_t k);

/** Copy with every generator's pmax and qmax scaled by factor, and qmin
 *  scaled when negative (symmetric reactive widening). pmin is unchanged. */
Network scale_generation_capacity(const Network& net, scalar_t factor);

}  // namespace opfgap
