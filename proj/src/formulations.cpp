#include "opfgap/formulations.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "opfgap/envelopes.hpp"

namespace opfgap::formulations {

namespace {

constexpr scalar_t kWideAngle = 1.5707963267948966 - 1e-9;

struct BranchY {
  scalar_t gff, bff, gft, bft, gtf, btf, gtt, btt;
};

BranchY admittance_blocks(const Branch& br) {
  const complex_t y = branch_admittance(br);
  const complex_t half_charge(0.0, 0.5 * br.charge_b);
  const complex_t shift = std::polar(1.0, br.shift);
  const complex_t yff = (y + half_charge) / (br.tap * br.tap);
  const complex_t yft = -y * shift / br.tap;
  const complex_t ytf = -y * std::conj(shift) / br.tap;
  const complex_t ytt = y + half_charge;
  return {yff.real(), yff.imag(), yft.real(), yft.imag(),
          ytf.real(), ytf.imag(), ytt.real(), ytt.imag()};
}

index_t reference_bus(const Network& net) {
  bool found = false;
  int best = 0;
  for (const auto& g : net.generators()) {
    if (!found || g.bus < best) {
      best = g.bus;
      found = true;
    }
  }
  if (!found) throw ValidationError("network has no generator to anchor the reference angle");
  return net.bus_index(best);
}

std::vector<complex_t> scaled_withdrawal(const Network& net, const LoadScaling& scaling) {
  std::vector<complex_t> w(static_cast<std::size_t>(net.num_buses()), complex_t(0, 0));
  for (const auto& load : net.loads()) {
    w[static_cast<std::size_t>(net.bus_index(load.bus))] +=
        scaling.factor(load) * complex_t(load.p, load.q);
  }
  return w;
}

std::string id_tag(int id) { return "[" + std::to_string(id) + "]"; }

std::string pair_tag(const Network& net, const Layout& lo, index_t pair) {
  const int a = net.buses()[static_cast<std::size_t>(lo.pairs[static_cast<std::size_t>(pair)].first)].id;
  const int b = net.buses()[static_cast<std::size_t>(lo.pairs[static_cast<std::size_t>(pair)].second)].id;
  return "[" + std::to_string(a) + "-" + std::to_string(b) + "]";
}

/** Shared assembly for the polar model and every lifted relaxation. */
class Builder {
 public:
  Builder(const Network& net, const LoadScaling& scaling) : net_(net), scaling_(scaling) {
    if (!(scaling.t > 0.0)) throw ValidationError("load scale must be positive");
    lo_.n_bus = net.num_buses();
    lo_.n_gen = net.num_generators();
    lo_.n_branch = net.num_branches();
    v_flat_.resize(lo_.n_bus);
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      const Bus& bus = net.buses()[static_cast<std::size_t>(b)];
      v_flat_[b] = std::min(std::max(scalar_t(1), bus.vmin), bus.vmax);
    }
  }

  void map_pairs() {
    std::map<std::pair<int, int>, index_t> seen;
    lo_.branch_pair.resize(static_cast<std::size_t>(lo_.n_branch));
    lo_.branch_sign.resize(static_cast<std::size_t>(lo_.n_branch));
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const int lo_id = std::min(br.from_bus, br.to_bus);
      const int hi_id = std::max(br.from_bus, br.to_bus);
      const auto key = std::make_pair(lo_id, hi_id);
      auto it = seen.find(key);
      if (it == seen.end()) {
        it = seen.emplace(key, static_cast<index_t>(lo_.pairs.size())).first;
        lo_.pairs.emplace_back(net_.bus_index(lo_id), net_.bus_index(hi_id));
        lo_.pair_angle.push_back(br.angle_max);
      } else {
        auto& tight = lo_.pair_angle[static_cast<std::size_t>(it->second)];
        tight = std::min(tight, br.angle_max);
      }
      lo_.branch_pair[static_cast<std::size_t>(k)] = it->second;
      lo_.branch_sign[static_cast<std::size_t>(k)] = br.from_bus == lo_id ? 1.0 : -1.0;
    }
    lo_.n_pair = static_cast<index_t>(lo_.pairs.size());
  }

  void add_polar_voltages() {
    lo_.vm0 = next_;
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      const Bus& bus = net_.buses()[static_cast<std::size_t>(b)];
      push_var("vm" + id_tag(bus.id), bus.vmin, bus.vmax, v_flat_[b]);
    }
    lo_.va0 = next_;
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      push_var("va" + id_tag(net_.buses()[static_cast<std::size_t>(b)].id), -kUnbounded,
               kUnbounded, 0.0);
    }
  }

  void add_lifted_voltages() {
    lo_.wnn0 = next_;
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      const Bus& bus = net_.buses()[static_cast<std::size_t>(b)];
      push_var("wnn" + id_tag(bus.id), bus.vmin * bus.vmin, bus.vmax * bus.vmax,
               v_flat_[b] * v_flat_[b]);
    }
    lo_.wr0 = next_;
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      push_var("wr" + pair_tag(net_, lo_, p), -kUnbounded, kUnbounded, flat_wr(p));
    }
    lo_.wi0 = next_;
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      push_var("wi" + pair_tag(net_, lo_, p), -kUnbounded, kUnbounded, 0.0);
    }
  }

  void add_qc_auxiliaries() {
    envelopes_.reserve(static_cast<std::size_t>(lo_.n_pair));
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      envelopes_.push_back(make_envelopes(lo_.pair_angle[static_cast<std::size_t>(p)]));
    }
    lo_.vv0 = next_;
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      const auto [a, b] = lo_.pairs[static_cast<std::size_t>(p)];
      const Bus& ba = net_.buses()[static_cast<std::size_t>(a)];
      const Bus& bb = net_.buses()[static_cast<std::size_t>(b)];
      push_var("vv" + pair_tag(net_, lo_, p), ba.vmin * bb.vmin, ba.vmax * bb.vmax,
               v_flat_[a] * v_flat_[b]);
    }
    lo_.ch0 = next_;
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      push_var("ch" + pair_tag(net_, lo_, p), envelopes_[static_cast<std::size_t>(p)].cos_lower,
               1.0, 1.0);
    }
    lo_.sh0 = next_;
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      const scalar_t su = sin_reach(p);
      push_var("sh" + pair_tag(net_, lo_, p), -su, su, 0.0);
    }
  }

  void add_dispatch() {
    lo_.pg0 = next_;
    for (const auto& g : net_.generators()) {
      push_var("pg" + id_tag(g.id), g.pmin, g.pmax, 0.5 * (g.pmin + g.pmax));
    }
    lo_.qg0 = next_;
    for (const auto& g : net_.generators()) {
      push_var("qg" + id_tag(g.id), g.qmin, g.qmax, 0.5 * (g.qmin + g.qmax));
    }
  }

  void add_flows() {
    lo_.flow0 = next_;
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const BranchY y = admittance_blocks(br);
      const scalar_t vf = v_flat_[net_.bus_index(br.from_bus)];
      const scalar_t vt = v_flat_[net_.bus_index(br.to_bus)];
      const std::string tag = id_tag(br.id);
      push_var("pf" + tag, -kUnbounded, kUnbounded, y.gff * vf * vf + y.gft * vf * vt);
      push_var("qf" + tag, -kUnbounded, kUnbounded, -y.bff * vf * vf - y.bft * vf * vt);
      push_var("pt" + tag, -kUnbounded, kUnbounded, y.gtt * vt * vt + y.gtf * vf * vt);
      push_var("qt" + tag, -kUnbounded, kUnbounded, -y.btt * vt * vt - y.btf * vf * vt);
    }
  }

  void add_cost_objective() {
    for (index_t g = 0; g < lo_.n_gen; ++g) {
      const Generator& gen = net_.generators()[static_cast<std::size_t>(g)];
      if (gen.cost_c2 != 0.0) problem_.objective.add_quad(lo_.pg(g), lo_.pg(g), gen.cost_c2);
      problem_.objective.add_linear(lo_.pg(g), gen.cost_c1);
      problem_.objective.add_constant(gen.cost_c0);
    }
  }

  void add_distance_objective(const vector_t& target_pg, const vector_t& target_qg) {
    if (target_pg.size() != lo_.n_gen || target_qg.size() != lo_.n_gen) {
      throw ValidationError("dispatch target size does not match the generator count");
    }
    for (index_t g = 0; g < lo_.n_gen; ++g) {
      problem_.objective.add_quad(lo_.pg(g), lo_.pg(g), 1.0);
      problem_.objective.add_linear(lo_.pg(g), -2.0 * target_pg[g]);
      problem_.objective.add_constant(target_pg[g] * target_pg[g]);
      problem_.objective.add_quad(lo_.qg(g), lo_.qg(g), 1.0);
      problem_.objective.add_linear(lo_.qg(g), -2.0 * target_qg[g]);
      problem_.objective.add_constant(target_qg[g] * target_qg[g]);
    }
  }

  void add_reference_row() {
    problem_.equalities.push_back(
        {"ref_angle", Expr::variable(lo_.va(reference_bus(net_)))});
  }

  void add_balances(bool lifted) {
    const auto withdrawal = scaled_withdrawal(net_, scaling_);
    std::vector<Expr> bal_p(static_cast<std::size_t>(lo_.n_bus));
    std::vector<Expr> bal_q(static_cast<std::size_t>(lo_.n_bus));
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      bal_p[static_cast<std::size_t>(b)].add_constant(-withdrawal[static_cast<std::size_t>(b)].real());
      bal_q[static_cast<std::size_t>(b)].add_constant(-withdrawal[static_cast<std::size_t>(b)].imag());
    }
    for (index_t g = 0; g < lo_.n_gen; ++g) {
      const index_t b = net_.bus_index(net_.generators()[static_cast<std::size_t>(g)].bus);
      bal_p[static_cast<std::size_t>(b)].add_linear(lo_.pg(g), 1.0);
      bal_q[static_cast<std::size_t>(b)].add_linear(lo_.qg(g), 1.0);
    }
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const index_t f = net_.bus_index(br.from_bus);
      const index_t t = net_.bus_index(br.to_bus);
      bal_p[static_cast<std::size_t>(f)].add_linear(lo_.pf(k), -1.0);
      bal_q[static_cast<std::size_t>(f)].add_linear(lo_.qf(k), -1.0);
      bal_p[static_cast<std::size_t>(t)].add_linear(lo_.pt(k), -1.0);
      bal_q[static_cast<std::size_t>(t)].add_linear(lo_.qt(k), -1.0);
    }
    for (const auto& sh : net_.shunts()) {
      const index_t b = net_.bus_index(sh.bus);
      if (lifted) {
        bal_p[static_cast<std::size_t>(b)].add_linear(lo_.wnn(b), -sh.gs);
        bal_q[static_cast<std::size_t>(b)].add_linear(lo_.wnn(b), sh.bs);
      } else {
        bal_p[static_cast<std::size_t>(b)].add_quad(lo_.vm(b), lo_.vm(b), -sh.gs);
        bal_q[static_cast<std::size_t>(b)].add_quad(lo_.vm(b), lo_.vm(b), sh.bs);
      }
    }
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      const std::string tag = id_tag(net_.buses()[static_cast<std::size_t>(b)].id);
      problem_.equalities.push_back({"bal_p" + tag, bal_p[static_cast<std::size_t>(b)]});
      problem_.equalities.push_back({"bal_q" + tag, bal_q[static_cast<std::size_t>(b)]});
    }
  }

  void add_polar_flow_defs() {
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const BranchY y = admittance_blocks(br);
      const index_t f = net_.bus_index(br.from_bus);
      const index_t t = net_.bus_index(br.to_bus);
      const std::string tag = id_tag(br.id);

      Expr pf;
      pf.add_linear(lo_.pf(k), 1.0).add_quad(lo_.vm(f), lo_.vm(f), -y.gff);
      pf.add_cos(lo_.vm(f), lo_.vm(t), lo_.va(f), lo_.va(t), -y.gft);
      pf.add_sin(lo_.vm(f), lo_.vm(t), lo_.va(f), lo_.va(t), -y.bft);
      problem_.equalities.push_back({"flow_pf" + tag, pf});

      Expr qf;
      qf.add_linear(lo_.qf(k), 1.0).add_quad(lo_.vm(f), lo_.vm(f), y.bff);
      qf.add_sin(lo_.vm(f), lo_.vm(t), lo_.va(f), lo_.va(t), -y.gft);
      qf.add_cos(lo_.vm(f), lo_.vm(t), lo_.va(f), lo_.va(t), y.bft);
      problem_.equalities.push_back({"flow_qf" + tag, qf});

      Expr pt;
      pt.add_linear(lo_.pt(k), 1.0).add_quad(lo_.vm(t), lo_.vm(t), -y.gtt);
      pt.add_cos(lo_.vm(t), lo_.vm(f), lo_.va(t), lo_.va(f), -y.gtf);
      pt.add_sin(lo_.vm(t), lo_.vm(f), lo_.va(t), lo_.va(f), -y.btf);
      problem_.equalities.push_back({"flow_pt" + tag, pt});

      Expr qt;
      qt.add_linear(lo_.qt(k), 1.0).add_quad(lo_.vm(t), lo_.vm(t), y.btt);
      qt.add_sin(lo_.vm(t), lo_.vm(f), lo_.va(t), lo_.va(f), -y.gtf);
      qt.add_cos(lo_.vm(t), lo_.vm(f), lo_.va(t), lo_.va(f), y.btf);
      problem_.equalities.push_back({"flow_qt" + tag, qt});
    }
  }

  void add_lifted_flow_defs() {
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const BranchY y = admittance_blocks(br);
      const index_t f = net_.bus_index(br.from_bus);
      const index_t t = net_.bus_index(br.to_bus);
      const index_t p = lo_.branch_pair[static_cast<std::size_t>(k)];
      const scalar_t sg = lo_.branch_sign[static_cast<std::size_t>(k)];
      const std::string tag = id_tag(br.id);

      Expr pf;
      pf.add_linear(lo_.pf(k), 1.0).add_linear(lo_.wnn(f), -y.gff);
      pf.add_linear(lo_.wr(p), -y.gft).add_linear(lo_.wi(p), -y.bft * sg);
      problem_.equalities.push_back({"flow_pf" + tag, pf});

      Expr qf;
      qf.add_linear(lo_.qf(k), 1.0).add_linear(lo_.wnn(f), y.bff);
      qf.add_linear(lo_.wi(p), -y.gft * sg).add_linear(lo_.wr(p), y.bft);
      problem_.equalities.push_back({"flow_qf" + tag, qf});

      Expr pt;
      pt.add_linear(lo_.pt(k), 1.0).add_linear(lo_.wnn(t), -y.gtt);
      pt.add_linear(lo_.wr(p), -y.gtf).add_linear(lo_.wi(p), y.btf * sg);
      problem_.equalities.push_back({"flow_pt" + tag, pt});

      Expr qt;
      qt.add_linear(lo_.qt(k), 1.0).add_linear(lo_.wnn(t), y.btt);
      qt.add_linear(lo_.wi(p), y.gtf * sg).add_linear(lo_.wr(p), y.btf);
      problem_.equalities.push_back({"flow_qt" + tag, qt});
    }
  }

  void add_thermal_limits() {
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      if (br.s_max <= 0.0) continue;  // unlimited
      const scalar_t cap = br.s_max * br.s_max;
      const std::string tag = id_tag(br.id);
      Expr f;
      f.add_quad(lo_.pf(k), lo_.pf(k), 1.0).add_quad(lo_.qf(k), lo_.qf(k), 1.0);
      f.add_constant(-cap);
      problem_.inequalities.push_back({"smax_f" + tag, f});
      Expr t;
      t.add_quad(lo_.pt(k), lo_.pt(k), 1.0).add_quad(lo_.qt(k), lo_.qt(k), 1.0);
      t.add_constant(-cap);
      problem_.inequalities.push_back({"smax_t" + tag, t});
    }
  }

  void add_polar_angle_rows() {
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const index_t f = net_.bus_index(br.from_bus);
      const index_t t = net_.bus_index(br.to_bus);
      const std::string tag = id_tag(br.id);
      Expr ub;
      ub.add_linear(lo_.va(f), 1.0).add_linear(lo_.va(t), -1.0).add_constant(-br.angle_max);
      problem_.inequalities.push_back({"ang_ub" + tag, ub});
      Expr lb;
      lb.add_linear(lo_.va(f), -1.0).add_linear(lo_.va(t), 1.0).add_constant(-br.angle_max);
      problem_.inequalities.push_back({"ang_lb" + tag, lb});
    }
  }

  void add_lifted_angle_rows() {
    for (index_t k = 0; k < lo_.n_branch; ++k) {
      const Branch& br = net_.branches()[static_cast<std::size_t>(k)];
      const index_t p = lo_.branch_pair[static_cast<std::size_t>(k)];
      const scalar_t sg = lo_.branch_sign[static_cast<std::size_t>(k)];
      const std::string tag = id_tag(br.id);
      if (br.angle_max >= kWideAngle) {
        // tan blows up; the limit of both cuts is the half plane wr >= 0.
        Expr row;
        row.add_linear(lo_.wr(p), -1.0);
        problem_.inequalities.push_back({"angw" + tag, row});
        continue;
      }
      const scalar_t tn = std::tan(br.angle_max);
      Expr ub;
      ub.add_linear(lo_.wi(p), sg).add_linear(lo_.wr(p), -tn);
      problem_.inequalities.push_back({"angw_ub" + tag, ub});
      Expr lb;
      lb.add_linear(lo_.wi(p), -sg).add_linear(lo_.wr(p), -tn);
      problem_.inequalities.push_back({"angw_lb" + tag, lb});
    }
  }

  void add_cone_rows() {
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      const auto [a, b] = lo_.pairs[static_cast<std::size_t>(p)];
      Expr cone;
      cone.add_quad(lo_.wr(p), lo_.wr(p), 1.0).add_quad(lo_.wi(p), lo_.wi(p), 1.0);
      cone.add_quad(lo_.wnn(a), lo_.wnn(b), -1.0);
      problem_.inequalities.push_back({"cone" + pair_tag(net_, lo_, p), cone});
    }
  }

  void add_minor_rows() {
    // 3-cliques of the pair graph, ordered by bus id triple.
    std::map<int, std::set<int>> adj;
    std::map<std::pair<int, int>, index_t> edge;
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      const auto [a, b] = lo_.pairs[static_cast<std::size_t>(p)];
      const int ia = net_.buses()[static_cast<std::size_t>(a)].id;
      const int ib = net_.buses()[static_cast<std::size_t>(b)].id;
      adj[ia].insert(ib);
      adj[ib].insert(ia);
      edge[{std::min(ia, ib), std::max(ia, ib)}] = p;
    }
    for (const auto& [i, ni] : adj) {
      for (int j : ni) {
        if (j <= i) continue;
        for (int k : adj[j]) {
          if (k <= j || !ni.count(k)) continue;
          const index_t pij = edge.at({i, j});
          const index_t pik = edge.at({i, k});
          const index_t pjk = edge.at({j, k});
          const index_t x = lo_.wnn(net_.bus_index(i));
          const index_t y = lo_.wnn(net_.bus_index(j));
          const index_t z = lo_.wnn(net_.bus_index(k));
          const std::string tri =
              std::to_string(i) + "-" + std::to_string(j) + "-" + std::to_string(k);

          const index_t diag[3] = {x, y, z};
          const int ids[3] = {i, j, k};
          for (int d = 0; d < 3; ++d) {
            Expr m1;
            m1.add_linear(diag[d], -1.0);
            problem_.inequalities.push_back(
                {"minor1[" + tri + ":" + std::to_string(ids[d]) + "]", m1});
          }

          const struct {
            index_t p, da, db;
            int ia, ib;
          } faces[3] = {{pij, x, y, i, j}, {pik, x, z, i, k}, {pjk, y, z, j, k}};
          for (const auto& fc : faces) {
            Expr m2;
            m2.add_quad(lo_.wr(fc.p), lo_.wr(fc.p), 1.0);
            m2.add_quad(lo_.wi(fc.p), lo_.wi(fc.p), 1.0);
            m2.add_quad(fc.da, fc.db, -1.0);
            problem_.inequalities.push_back({"minor2[" + tri + ":" + std::to_string(fc.ia) +
                                                 "-" + std::to_string(fc.ib) + "]",
                                             m2});
          }

          // -det of the Hermitian 3x3 block, a = W_ij, b = W_ik, c = W_jk:
          // det = xyz - x|c|^2 - y|b|^2 - z|a|^2 + 2 Re(a c conj(b)).
          const index_t aR = lo_.wr(pij), aI = lo_.wi(pij);
          const index_t bR = lo_.wr(pik), bI = lo_.wi(pik);
          const index_t cR = lo_.wr(pjk), cI = lo_.wi(pjk);
          Expr m3;
          m3.add_cubic(x, y, z, -1.0);
          m3.add_cubic(x, cR, cR, 1.0).add_cubic(x, cI, cI, 1.0);
          m3.add_cubic(y, bR, bR, 1.0).add_cubic(y, bI, bI, 1.0);
          m3.add_cubic(z, aR, aR, 1.0).add_cubic(z, aI, aI, 1.0);
          m3.add_cubic(aR, cR, bR, -2.0).add_cubic(aI, cI, bR, 2.0);
          m3.add_cubic(aR, cI, bI, -2.0).add_cubic(aI, cR, bI, -2.0);
          problem_.inequalities.push_back({"minor3[" + tri + "]", m3});
        }
      }
    }
  }

  void add_qc_envelope_rows() {
    for (index_t b = 0; b < lo_.n_bus; ++b) {
      const Bus& bus = net_.buses()[static_cast<std::size_t>(b)];
      const auto rows = square_envelope(lo_.wnn(b), lo_.vm(b), bus.vmin, bus.vmax);
      problem_.inequalities.push_back({"sqenv_lo" + id_tag(bus.id), rows[0]});
      problem_.inequalities.push_back({"sqenv_hi" + id_tag(bus.id), rows[1]});
    }
    for (index_t p = 0; p < lo_.n_pair; ++p) {
      const auto [a, b] = lo_.pairs[static_cast<std::size_t>(p)];
      const EnvelopeSet& env = envelopes_[static_cast<std::size_t>(p)];
      const std::string tag = pair_tag(net_, lo_, p);

      Expr cos_hi;  // ch <= 1 - coef * (va_a - va_b)^2
      cos_hi.add_linear(lo_.ch(p), 1.0).add_constant(-1.0);
      cos_hi.add_quad(lo_.va(a), lo_.va(a), env.cos_quad_coef);
      cos_hi.add_quad(lo_.va(b), lo_.va(b), env.cos_quad_coef);
      cos_hi.add_quad(lo_.va(a), lo_.va(b), -2.0 * env.cos_quad_coef);
      problem_.inequalities.push_back({"cosenv" + tag, cos_hi});

      Expr sin_hi;  // sh <= slope * (va_a - va_b) + offset
      sin_hi.add_linear(lo_.sh(p), 1.0).add_constant(-env.sin_offset);
      sin_hi.add_linear(lo_.va(a), -env.sin_slope).add_linear(lo_.va(b), env.sin_slope);
      problem_.inequalities.push_back({"sinenv_ub" + tag, sin_hi});

      Expr sin_lo;  // sh >= slope * (va_a - va_b) - offset
      sin_lo.add_linear(lo_.sh(p), -1.0).add_constant(-env.sin_offset);
      sin_lo.add_linear(lo_.va(a), env.sin_slope).add_linear(lo_.va(b), -env.sin_slope);
      problem_.inequalities.push_back({"sinenv_lb" + tag, sin_lo});

      const Bus& ba = net_.buses()[static_cast<std::size_t>(a)];
      const Bus& bb = net_.buses()[static_cast<std::size_t>(b)];
      push_mccormick("mc_vv" + tag,
                     mccormick_product(lo_.vv(p), lo_.vm(a), lo_.vm(b),
                                       {ba.vmin, ba.vmax, bb.vmin, bb.vmax}));
      const scalar_t vvl = ba.vmin * bb.vmin, vvu = ba.vmax * bb.vmax;
      push_mccormick("mc_wr" + tag, mccormick_product(lo_.wr(p), lo_.vv(p), lo_.ch(p),
                                                      {vvl, vvu, env.cos_lower, 1.0}));
      const scalar_t su = sin_reach(p);
      push_mccormick("mc_wi" + tag,
                     mccormick_product(lo_.wi(p), lo_.vv(p), lo_.sh(p), {vvl, vvu, -su, su}));
    }
  }

  BuiltModel take(ModelKind model, std::string tag, bool convex) {
    problem_.tag = std::move(tag);
    problem_.convex = convex;
    problem_.validate();
    return {std::move(problem_), std::move(lo_), model};
  }

 private:
  void push_var(std::string name, scalar_t lo, scalar_t hi, scalar_t init) {
    problem_.variables.push_back({std::move(name), lo, hi, init});
    ++next_;
  }

  void push_mccormick(const std::string& base, std::vector<Expr> rows) {
    for (std::size_t q = 0; q < rows.size(); ++q) {
      std::string name = base;
      name.insert(name.size() - 1, ":" + std::to_string(q));
      problem_.inequalities.push_back({std::move(name), std::move(rows[q])});
    }
  }

  scalar_t flat_wr(index_t pair) const {
    const auto [a, b] = lo_.pairs[static_cast<std::size_t>(pair)];
    return v_flat_[a] * v_flat_[b];
  }

  scalar_t sin_reach(index_t pair) const {
    const EnvelopeSet& env = envelopes_[static_cast<std::size_t>(pair)];
    return env.sin_slope * env.angle_max + env.sin_offset;
  }

  const Network& net_;
  LoadScaling scaling_;
  Layout lo_;
  NlpProblem problem_;
  vector_t v_flat_;
  std::vector<EnvelopeSet> envelopes_;
  index_t next_ = 0;
};

BuiltModel build_w_space(const Network& net, const LoadScaling& scaling, ModelKind model,
                         bool with_minors) {
  Builder b(net, scaling);
  b.map_pairs();
  b.add_lifted_voltages();
  b.add_dispatch();
  b.add_flows();
  b.add_cost_objective();
  b.add_balances(true);
  b.add_lifted_flow_defs();
  b.add_thermal_limits();
  b.add_lifted_angle_rows();
  b.add_cone_rows();
  if (with_minors) b.add_minor_rows();
  return b.take(model, to_string(model), true);
}

}  // namespace

BuiltModel build_ac_opf(const Network& net, const LoadScaling& scaling) {
  Builder b(net, scaling);
  b.map_pairs();
  b.add_polar_voltages();
  b.add_dispatch();
  b.add_flows();
  b.add_cost_objective();
  b.add_reference_row();
  b.add_balances(false);
  b.add_polar_flow_defs();
  b.add_thermal_limits();
  b.add_polar_angle_rows();
  return b.take(ModelKind::ac, "ac", false);
}

BuiltModel build_socp(const Network& net, const LoadScaling& scaling) {
  return build_w_space(net, scaling, ModelKind::socp, false);
}

BuiltModel build_sdp(const Network& net, const LoadScaling& scaling, int minor_order) {
  if (minor_order == 2) return build_w_space(net, scaling, ModelKind::sdp2, false);
  if (minor_order == 3) return build_w_space(net, scaling, ModelKind::sdp3, true);
  throw ValidationError("minor order must be 2 or 3");
}

BuiltModel build_qc(const Network& net, const LoadScaling& scaling) {
  Builder b(net, scaling);
  b.map_pairs();
  b.add_polar_voltages();
  b.add_lifted_voltages();
  b.add_qc_auxiliaries();
  b.add_dispatch();
  b.add_flows();
  b.add_cost_objective();
  b.add_reference_row();
  b.add_balances(true);
  b.add_lifted_flow_defs();
  b.add_thermal_limits();
  b.add_polar_angle_rows();
  b.add_lifted_angle_rows();
  b.add_cone_rows();
  b.add_qc_envelope_rows();
  return b.take(ModelKind::qc, "qc", true);
}

BuiltModel build_load_flow(const Network& net, const LoadScaling& scaling,
                           const vector_t& target_pg, const vector_t& target_qg) {
  Builder b(net, scaling);
  b.map_pairs();
  b.add_polar_voltages();
  b.add_dispatch();
  b.add_flows();
  b.add_distance_objective(target_pg, target_qg);
  b.add_reference_row();
  b.add_balances(false);
  b.add_polar_flow_defs();
  b.add_thermal_limits();
  b.add_polar_angle_rows();
  return b.take(ModelKind::ac, "loadflow", false);
}

namespace {

matrix_t extract_flows(const Layout& lo, const vector_t& x) {
  matrix_t flows(lo.n_branch, 4);
  for (index_t k = 0; k < lo.n_branch; ++k) {
    flows(k, 0) = x[lo.pf(k)];
    flows(k, 1) = x[lo.qf(k)];
    flows(k, 2) = x[lo.pt(k)];
    flows(k, 3) = x[lo.qt(k)];
  }
  return flows;
}

}  // namespace

AcSolution extract_ac_solution(const Network& net, const BuiltModel& model,
                               const SolveOutcome& outcome) {
  const Layout& lo = model.layout;
  if (lo.vm0 < 0 || lo.va0 < 0) throw ValidationError("model has no polar voltage block");
  AcSolution sol;
  sol.vm = outcome.x.segment(lo.vm0, lo.n_bus);
  sol.va = outcome.x.segment(lo.va0, lo.n_bus);
  sol.pg = outcome.x.segment(lo.pg0, lo.n_gen);
  sol.qg = outcome.x.segment(lo.qg0, lo.n_gen);
  sol.flows = extract_flows(lo, outcome.x);
  sol.objective = outcome.objective;
  sol.dispatch_cost = total_generation_cost(net, sol.pg);
  sol.status = outcome.status;
  sol.iterations = outcome.iterations;
  sol.solve_time_s = outcome.wall_time_s;
  return sol;
}

RelaxSolution extract_relax_solution(const Network& net, const BuiltModel& model,
                                     const SolveOutcome& outcome) {
  const Layout& lo = model.layout;
  if (lo.wnn0 < 0) throw ValidationError("model has no lifted voltage block");
  RelaxSolution sol;
  sol.model = model.model;
  sol.w_nn = outcome.x.segment(lo.wnn0, lo.n_bus);
  sol.w_re = outcome.x.segment(lo.wr0, lo.n_pair);
  sol.w_im = outcome.x.segment(lo.wi0, lo.n_pair);
  sol.pairs = lo.pairs;
  sol.pg = outcome.x.segment(lo.pg0, lo.n_gen);
  sol.qg = outcome.x.segment(lo.qg0, lo.n_gen);
  sol.flows = extract_flows(lo, outcome.x);
  sol.objective = outcome.objective;
  sol.status = outcome.status;
  sol.iterations = outcome.iterations;
  sol.solve_time_s = outcome.wall_time_s;
  (void)net;
  return sol;
}

matrix_t ac_branch_flows(const Network& net, const vector_t& vm, const vector_t& va) {
  if (vm.size() != net.num_buses() || va.size() != net.num_buses()) {
    throw ValidationError("voltage profile size does not match the bus count");
  }
  matrix_t flows(net.num_branches(), 4);
  for (index_t k = 0; k < net.num_branches(); ++k) {
    const Branch& br = net.branches()[static_cast<std::size_t>(k)];
    const BranchY y = admittance_blocks(br);
    const index_t f = net.bus_index(br.from_bus);
    const index_t t = net.bus_index(br.to_bus);
    const scalar_t c = std::cos(va[f] - va[t]);
    const scalar_t s = std::sin(va[f] - va[t]);
    const scalar_t vft = vm[f] * vm[t];
    flows(k, 0) = y.gff * vm[f] * vm[f] + vft * (y.gft * c + y.bft * s);
    flows(k, 1) = -y.bff * vm[f] * vm[f] + vft * (y.gft * s - y.bft * c);
    flows(k, 2) = y.gtt * vm[t] * vm[t] + vft * (y.gtf * c - y.btf * s);
    flows(k, 3) = -y.btt * vm[t] * vm[t] + vft * (-y.gtf * s - y.btf * c);
  }
  return flows;
}

scalar_t evaluate_feasibility(const Network& net, const LoadScaling& scaling, const vector_t& vm,
                              const vector_t& va, const vector_t& pg, const vector_t& qg) {
  if (pg.size() != net.num_generators() || qg.size() != net.num_generators()) {
    throw ValidationError("dispatch size does not match the generator count");
  }
  const matrix_t flows = ac_branch_flows(net, vm, va);
  const auto withdrawal = scaled_withdrawal(net, scaling);

  scalar_t viol = 0.0;
  vector_t inj_p = vector_t::Zero(net.num_buses());
  vector_t inj_q = vector_t::Zero(net.num_buses());
  for (index_t g = 0; g < net.num_generators(); ++g) {
    const Generator& gen = net.generators()[static_cast<std::size_t>(g)];
    viol = std::max({viol, gen.pmin - pg[g], pg[g] - gen.pmax, gen.qmin - qg[g],
                     qg[g] - gen.qmax});
    const index_t b = net.bus_index(gen.bus);
    inj_p[b] += pg[g];
    inj_q[b] += qg[g];
  }
  for (index_t k = 0; k < net.num_branches(); ++k) {
    const Branch& br = net.branches()[static_cast<std::size_t>(k)];
    const index_t f = net.bus_index(br.from_bus);
    const index_t t = net.bus_index(br.to_bus);
    inj_p[f] -= flows(k, 0);
    inj_q[f] -= flows(k, 1);
    inj_p[t] -= flows(k, 2);
    inj_q[t] -= flows(k, 3);
    if (br.s_max > 0.0) {
      viol = std::max({viol, std::hypot(flows(k, 0), flows(k, 1)) - br.s_max,
                       std::hypot(flows(k, 2), flows(k, 3)) - br.s_max});
    }
    viol = std::max(viol, std::abs(va[f] - va[t]) - br.angle_max);
  }
  for (const auto& sh : net.shunts()) {
    const index_t b = net.bus_index(sh.bus);
    inj_p[b] -= sh.gs * vm[b] * vm[b];
    inj_q[b] += sh.bs * vm[b] * vm[b];
  }
  for (index_t b = 0; b < net.num_buses(); ++b) {
    const Bus& bus = net.buses()[static_cast<std::size_t>(b)];
    viol = std::max({viol, bus.vmin - vm[b], vm[b] - bus.vmax});
    viol = std::max(viol, std::abs(inj_p[b] - withdrawal[static_cast<std::size_t>(b)].real()));
    viol = std::max(viol, std::abs(inj_q[b] - withdrawal[static_cast<std::size_t>(b)].imag()));
  }
  return std::max(viol, scalar_t(0));
}

BindingCensus binding_census(const Network& net, const vector_t& vm, const matrix_t& flows,
                             const CensusOptions& options) {
  if (vm.size() != net.num_buses() || flows.rows() != net.num_branches()) {
    throw ValidationError("census inputs do not match the network");
  }
  BindingCensus census;
  for (index_t b = 0; b < net.num_buses(); ++b) {
    const Bus& bus = net.buses()[static_cast<std::size_t>(b)];
    if (vm[b] <= bus.vmin + options.eps_vmag || vm[b] >= bus.vmax - options.eps_vmag) {
      ++census.n_vmag;
    }
  }
  for (index_t k = 0; k < net.num_branches(); ++k) {
    const Branch& br = net.branches()[static_cast<std::size_t>(k)];
    const scalar_t sf = std::hypot(flows(k, 0), flows(k, 1));
    const scalar_t st = std::hypot(flows(k, 2), flows(k, 3));
    bool binding = false;
    if (options.current_limits && br.i_max) {
      const index_t f = net.bus_index(br.from_bus);
      const index_t t = net.bus_index(br.to_bus);
      const scalar_t flow = std::max(sf / std::max(vm[f], scalar_t(1e-9)),
                                     st / std::max(vm[t], scalar_t(1e-9)));
      binding = flow >= *br.i_max * (1.0 - options.eps_flow);
    } else if (br.s_max > 0.0) {
      binding = std::max(sf, st) >= br.s_max * (1.0 - options.eps_flow);
    }
    if (binding) ++census.n_flow;
  }
  census.pct_vmag =
      net.num_buses() > 0 ? 100.0 * static_cast<scalar_t>(census.n_vmag) /
                                static_cast<scalar_t>(net.num_buses())
                          : 0.0;
  census.pct_flow =
      net.num_branches() > 0 ? 100.0 * static_cast<scalar_t>(census.n_flow) /
                                   static_cast<scalar_t>(net.num_branches())
                             : 0.0;
  return census;
}

BindingCensus binding_census(const Network& net, const AcSolution& sol,
                             const CensusOptions& options) {
  return binding_census(net, sol.vm, sol.flows, options);
}

BindingCensus binding_census(const Network& net, const RelaxSolution& sol,
                             const CensusOptions& options) {
  return binding_census(net, sol.vm_from_w(), sol.flows, options);
}

}  // namespace opfgap::formulations
