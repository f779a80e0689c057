#include "opfgap/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace opfgap {

std::string to_string(FuelType fuel) {
  switch (fuel) {
    case FuelType::solar: return "solar";
    case FuelType::wind: return "wind";
    case FuelType::thermal: return "thermal";
    case FuelType::hydro: return "hydro";
    case FuelType::nuclear: return "nuclear";
  }
  throw ValidationError("unknown fuel enum value");
}

FuelType fuel_from_string(const std::string& name) {
  if (name == "solar") return FuelType::solar;
  if (name == "wind") return FuelType::wind;
  if (name == "thermal") return FuelType::thermal;
  if (name == "hydro") return FuelType::hydro;
  if (name == "nuclear") return FuelType::nuclear;
  throw ValidationError("unknown fuel type '" + name + "'");
}

FuelCost default_fuel_cost(FuelType fuel) {
  // Per-unit based; renewables and hydro are linear (zero quadratic term).
  switch (fuel) {
    case FuelType::thermal: return {0.11, 5.0, 0.0};
    case FuelType::nuclear: return {0.02, 1.0, 0.0};
    case FuelType::hydro: return {0.0, 0.5, 0.0};
    case FuelType::wind: return {0.0, 0.3, 0.0};
    case FuelType::solar: return {0.0, 0.2, 0.0};
  }
  throw ValidationError("unknown fuel enum value");
}

namespace {

bool is_renewable(FuelType fuel) {
  return fuel == FuelType::solar || fuel == FuelType::wind || fuel == FuelType::hydro;
}

template <typename T>
void require_unique_ids(const std::vector<T>& items, const char* what) {
  std::set<int> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) {
      std::ostringstream msg;
      msg << "duplicate " << what << " id " << item.id;
      throw ValidationError(msg.str());
    }
  }
}

}  // namespace

Network::Network(scalar_t base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                 std::vector<Generator> generators, std::vector<Load> loads,
                 std::vector<Shunt> shunts)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)),
      loads_(std::move(loads)),
      shunts_(std::move(shunts)) {
  for (index_t i = 0; i < num_buses(); ++i) {
    bus_index_.emplace(buses_[static_cast<std::size_t>(i)].id, i);
  }
  validate();
}

index_t Network::bus_index(int bus_id) const {
  auto it = bus_index_.find(bus_id);
  if (it == bus_index_.end()) {
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
  }
  return it->second;
}

void Network::validate() const {
  if (!(base_mva_ > 0.0)) throw ValidationError("base MVA must be positive");
  if (buses_.empty()) throw ValidationError("network has no buses");
  require_unique_ids(buses_, "bus");
  require_unique_ids(branches_, "branch");
  require_unique_ids(generators_, "generator");
  require_unique_ids(loads_, "load");
  require_unique_ids(shunts_, "shunt");

  for (const auto& b : buses_) {
    if (!(b.vmin > 0.0) || !(b.vmax >= b.vmin)) {
      throw ValidationError("bus " + std::to_string(b.id) + ": voltage bounds must satisfy 0 < vmin <= vmax");
    }
  }
  auto check_bus = [&](int bus_id, const std::string& owner) {
    if (bus_index_.find(bus_id) == bus_index_.end()) {
      throw ValidationError(owner + " references unknown bus " + std::to_string(bus_id));
    }
  };
  constexpr scalar_t half_pi = 1.5707963267948966;
  for (const auto& br : branches_) {
    const std::string tag = "branch " + std::to_string(br.id);
    check_bus(br.from_bus, tag);
    check_bus(br.to_bus, tag);
    if (br.from_bus == br.to_bus) throw ValidationError(tag + ": self loop");
    if (br.r == 0.0 && br.x == 0.0) throw ValidationError(tag + ": zero series impedance");
    if (!(br.tap > 0.0)) throw ValidationError(tag + ": tap ratio must be positive");
    if (br.s_max < 0.0) throw ValidationError(tag + ": negative flow limit");
    if (!(br.angle_max > 0.0) || br.angle_max > half_pi + 1e-12) {
      throw ValidationError(tag + ": angle limit must lie in (0, pi/2]");
    }
    if (br.i_max && *br.i_max <= 0.0) throw ValidationError(tag + ": current limit must be positive");
  }
  for (const auto& g : generators_) {
    const std::string tag = "generator " + std::to_string(g.id);
    check_bus(g.bus, tag);
    if (g.pmin > g.pmax || g.qmin > g.qmax) throw ValidationError(tag + ": empty dispatch box");
    if (is_renewable(g.fuel) && g.cost_c2 != 0.0) {
      throw ValidationError(tag + ": " + to_string(g.fuel) + " generator has a quadratic cost term");
    }
    if (g.cost_c2 < 0.0) throw ValidationError(tag + ": concave cost");
  }
  for (const auto& l : loads_) check_bus(l.bus, "load " + std::to_string(l.id));
  for (const auto& s : shunts_) check_bus(s.bus, "shunt " + std::to_string(s.id));
}

complex_t branch_admittance(const Branch& branch) {
  if (branch.r == 0.0 && branch.x == 0.0) {
    throw ValidationError("branch " + std::to_string(branch.id) + ": zero series impedance");
  }
  return scalar_t(1) / complex_t(branch.r, branch.x);
}

scalar_t generation_cost(const Generator& gen, scalar_t p) {
  return (gen.cost_c2 * p + gen.cost_c1) * p + gen.cost_c0;
}

scalar_t total_generation_cost(const Network& net, const vector_t& pg) {
  const auto& gens = net.generators();
  if (pg.size() != static_cast<index_t>(gens.size())) {
    throw ValidationError("dispatch vector length does not match generator count");
  }
  scalar_t total = 0.0;
  for (index_t i = 0; i < pg.size(); ++i) {
    total += generation_cost(gens[static_cast<std::size_t>(i)], pg[i]);
  }
  return total;
}

std::set<int> select_lowest_voltage_loads(const Network& net, std::size_t k) {
  // Sort scalable loads by (host snapshot |V|, load id); absent setpoints rank
  // as nominal 1.0 p.u.
  std::vector<const Load*> candidates;
  for (const auto& l : net.loads()) {
    if (!l.is_injection) candidates.push_back(&l);
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Load* a, const Load* b) {
    const scalar_t va = net.bus(a->bus).setpoint_vm.value_or(1.0);
    const scalar_t vb = net.bus(b->bus).setpoint_vm.value_or(1.0);
    if (va != vb) return va < vb;
    return a->id < b->id;
  });
  std::set<int> ids;
  for (std::size_t i = 0; i < candidates.size() && i < k; ++i) ids.insert(candidates[i]->id);
  return ids;
}

Network scale_generation_capacity(const Network& net, scalar_t factor) {
  if (!(factor > 0.0)) throw ValidationError("capacity factor must be positive");
  auto gens = net.generators();
  for (auto& g : gens) {
    g.pmax *= factor;
    g.qmax *= factor;
    if (g.qmin < 0.0) g.qmin *= factor;
    if (g.pmin > g.pmax) g.pmin = g.pmax;  // shrink below pmin cannot empty the box
  }
  return Network(net.base_mva(), net.buses(), net.branches(), std::move(gens), net.loads(),
                 net.shunts());
}

}  // namespace opfgap
