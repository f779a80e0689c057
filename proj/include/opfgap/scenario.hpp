#pragma once

#include <set>
#include <string>
#include <vector>

#include "opfgap/types.hpp"

namespace opfgap {

class Network;

enum class ModelKind { ac, qc, socp, sdp2, sdp3 };

std::string to_string(ModelKind model);
ModelKind model_from_string(const std::string& name);

/** Which loads a sweep scales. */
struct LoadSelector {
  enum class Kind { all, lowest_k, ids };
  Kind kind = Kind::all;
  std::size_t k = 0;          // for lowest_k
  std::set<int> load_ids;     // for ids

  static LoadSelector parse(const std::string& text);
  std::string str() const;

  /** Resolve to concrete scalable load ids on a network. */
  std::set<int> resolve(const Network& net) const;
};

/** Complete description of one experiment. */
struct ScenarioSpec {
  scalar_t t_start = 1.0;
  scalar_t t_end = 1.0;
  scalar_t base_step = 0.02;
  scalar_t refine_step = 0.005;
  scalar_t refine_trigger = 2.0;  // gap jump, percentage points
  std::vector<ModelKind> models = {ModelKind::ac, ModelKind::qc, ModelKind::socp,
                                   ModelKind::sdp2, ModelKind::sdp3};
  LoadSelector loads;
  scalar_t gen_capacity_factor = 1.0;
  bool recovery_enabled = true;

  void validate() const;  // throws ValidationError
};

}  // namespace opfgap
