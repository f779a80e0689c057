#include "opfgap/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "opfgap/network.hpp"

namespace opfgap {

std::string to_string(ModelKind model) {
  switch (model) {
    case ModelKind::ac: return "ac";
    case ModelKind::qc: return "qc";
    case ModelKind::socp: return "socp";
    case ModelKind::sdp2: return "sdp2";
    case ModelKind::sdp3: return "sdp3";
  }
  throw ValidationError("unknown model enum value");
}

ModelKind model_from_string(const std::string& name) {
  if (name == "ac") return ModelKind::ac;
  if (name == "qc") return ModelKind::qc;
  if (name == "socp") return ModelKind::socp;
  if (name == "sdp2") return ModelKind::sdp2;
  if (name == "sdp3") return ModelKind::sdp3;
  throw ValidationError("unknown model '" + name + "' (expected ac, qc, socp, sdp2 or sdp3)");
}

LoadSelector LoadSelector::parse(const std::string& text) {
  LoadSelector sel;
  if (text == "all") {
    sel.kind = Kind::all;
    return sel;
  }
  auto tail_after = [&](const char* prefix) -> std::optional<std::string> {
    const std::size_t n = std::string(prefix).size();
    if (text.rfind(prefix, 0) == 0) return text.substr(n);
    return std::nullopt;
  };
  // Accept both spellings so scenario files and CLI flags share one grammar.
  std::optional<std::string> tail = tail_after("lowest_k:");
  if (!tail) tail = tail_after("lowest-k:");
  if (tail) {
    sel.kind = Kind::lowest_k;
    std::size_t pos = 0;
    try {
      const long k = std::stol(*tail, &pos);
      if (pos != tail->size() || k < 1) throw std::invalid_argument("");
      sel.k = static_cast<std::size_t>(k);
    } catch (const std::exception&) {
      throw ValidationError("load selector 'lowest_k' needs a positive count, got '" + *tail + "'");
    }
    return sel;
  }
  if ((tail = tail_after("ids:"))) {
    sel.kind = Kind::ids;
    std::stringstream ss(*tail);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t pos = 0;
      try {
        const int id = std::stoi(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("");
        sel.load_ids.insert(id);
      } catch (const std::exception&) {
        throw ValidationError("load selector 'ids' has a non-integer entry '" + item + "'");
      }
    }
    if (sel.load_ids.empty()) throw ValidationError("load selector 'ids' lists no ids");
    return sel;
  }
  throw ValidationError("unknown load selector '" + text +
                        "' (expected all, lowest_k:K or ids:a,b,...)");
}

std::string LoadSelector::str() const {
  switch (kind) {
    case Kind::all: return "all";
    case Kind::lowest_k: return "lowest_k:" + std::to_string(k);
    case Kind::ids: {
      std::string out = "ids:";
      bool first = true;
      for (int id : load_ids) {
        if (!first) out += ',';
        out += std::to_string(id);
        first = false;
      }
      return out;
    }
  }
  throw ValidationError("unknown load selector kind");
}

std::set<int> LoadSelector::resolve(const Network& net) const {
  switch (kind) {
    case Kind::all: {
      std::set<int> all;
      for (const auto& l : net.loads()) {
        if (!l.is_injection) all.insert(l.id);
      }
      return all;
    }
    case Kind::lowest_k:
      return select_lowest_voltage_loads(net, k);
    case Kind::ids: {
      for (int id : load_ids) {
        const auto& loads = net.loads();
        auto it = std::find_if(loads.begin(), loads.end(),
                               [id](const Load& l) { return l.id == id; });
        if (it == loads.end()) throw ValidationError("load id " + std::to_string(id) + " not in case");
        if (it->is_injection) {
          throw ValidationError("load " + std::to_string(id) + " is a fixed injection, not scalable");
        }
      }
      return load_ids;
    }
  }
  throw ValidationError("unknown load selector kind");
}

void ScenarioSpec::validate() const {
  if (!(t_start <= t_end)) throw ValidationError("scenario: t_start must not exceed t_end");
  if (!(t_start > 0.0)) throw ValidationError("scenario: load factors must be positive");
  if (!(base_step > 0.0)) throw ValidationError("scenario: step must be positive");
  if (!(refine_step > 0.0) || refine_step > base_step) {
    throw ValidationError("scenario: refine_step must lie in (0, step]");
  }
  if (!(refine_trigger > 0.0)) throw ValidationError("scenario: refine_trigger must be positive");
  if (!(gen_capacity_factor > 0.0)) {
    throw ValidationError("scenario: gen_capacity_factor must be positive");
  }
  if (models.empty()) throw ValidationError("scenario: at least one model is required");
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      if (models[i] == models[j]) {
        throw ValidationError("scenario: duplicate model '" + to_string(models[i]) + "'");
      }
    }
  }
  if (loads.kind == LoadSelector::Kind::lowest_k && loads.k == 0) {
    throw ValidationError("scenario: lowest_k selector needs k >= 1");
  }
  if (loads.kind == LoadSelector::Kind::ids && loads.load_ids.empty()) {
    throw ValidationError("scenario: ids selector lists no ids");
  }
}

}  // namespace opfgap
