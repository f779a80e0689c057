#include "opfgap/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>

#include <Eigen/SparseCholesky>

namespace opfgap {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::locally_infeasible: return "locally_infeasible";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::time_limit: return "time_limit";
    case SolveStatus::numeric_failure: return "numeric_failure";
  }
  return "unknown";
}

namespace {

constexpr scalar_t kTauMin = 0.995;     // fraction-to-the-boundary floor
constexpr scalar_t kSigmaCap = 1e10;    // multiplier clipping vs barrier
constexpr scalar_t kArmijoC1 = 1e-4;
constexpr scalar_t kMuLinear = 10.0;    // barrier decrease trigger factor
constexpr scalar_t kRestorationTol = 1e-6;

bool finite(scalar_t v) { return std::isfinite(v); }

class Ipm {
 public:
  Ipm(const NlpProblem& prob, const SolverOptions& opts, int depth)
      : prob_(prob), opts_(opts), depth_(depth) {}

  SolveOutcome run() {
    start_ = std::chrono::steady_clock::now();
    prob_.validate();
    if (prob_.num_vars() == 0) throw ValidationError("problem has no variables");
    prepare();
    initialize();

    mu_ = opts_.initial_barrier;
    const scalar_t mu_min = opts_.kkt_tolerance / 11.0;
    nu_ = 1.0;

    for (iter_ = 0; iter_ < opts_.max_iterations; ++iter_) {
      if (opts_.time_limit_s > 0.0 && elapsed() > opts_.time_limit_s) {
        return finish(SolveStatus::time_limit);
      }
      eval_iterate();
      // Lift slacks decoupled from strictly satisfied rows; raising s both
      // shrinks |c+s| and grows the barrier, so the merit strictly improves.
      for (index_t k = 0; k < mI_; ++k) s_[k] = std::max(s_[k], -cI_[k]);
      if (rescue_pending_) {
        rescue_pending_ = false;
        rescue_duals();
      }
      const scalar_t e0 = kkt_error(0.0);
      last_kkt_ = e0;
      if (e0 <= opts_.kkt_tolerance) return finish(SolveStatus::optimal);
      // Diverging multipliers against a stubborn primal residual are the
      // infeasibility certificate taking shape; go find out directly instead
      // of grinding the barrier iteration into the spiral.
      if (iter_ >= 5 && primal_infeasibility() > 100.0 * opts_.kkt_tolerance &&
          stationarity().lpNorm<Eigen::Infinity>() > 1e10) {
        if (auto out = handle_stall()) return *out;
        continue;
      }
      bool mu_dropped = false;
      while (mu_ > mu_min && kkt_error(mu_) <= kMuLinear * mu_) {
        mu_ = std::max(mu_min, std::min(opts_.barrier_reduction * mu_, std::pow(mu_, 1.5)));
        mu_dropped = true;
      }
      if (mu_dropped) nu_ = 1.0;  // fresh penalty for the new barrier subproblem

      // Direction with inertia-corrected factorization; a non-descent
      // direction is retried with stronger regularization.
      scalar_t dphi = 0.0;
      bool have_dir = false;
      bool pinned = false;
      for (int attempt = 0; attempt < 3 && !have_dir; ++attempt) {
        if (!compute_direction(attempt)) break;
        // A negligible primal direction is not a stall: the primal iterate
        // is pinned (all degrees of freedom used up by equalities) and the
        // step is pure dual recentering for the new barrier value, which
        // the primal merit function cannot measure.
        pinned = dx_.lpNorm<Eigen::Infinity>() <= 1e-11 * (1.0 + x_.lpNorm<Eigen::Infinity>()) &&
                 (mI_ == 0 || ds_.lpNorm<Eigen::Infinity>() <=
                                  1e-11 * (1.0 + s_.lpNorm<Eigen::Infinity>()));
        if (pinned) break;
        dphi = directional_derivative();
        if (std::getenv("OPFGAP_DEBUG_KKT")) {
          std::fprintf(stderr, "  [att:%s] iter=%ld attempt=%d dphi=%.3e |dx|=%.3e\n",
                       prob_.tag.c_str(), static_cast<long>(iter_), attempt, dphi,
                       dx_.lpNorm<Eigen::Infinity>());
        }
        if (dphi < 0.0) {
          have_dir = true;
        }
      }
      if (pinned && ++dual_only_steps_ <= 10) {
        const scalar_t alpha_dual = max_dual_step();
        yE_ += dyE_;
        yI_ += alpha_dual * dyI_;
        zL_ += alpha_dual * dzL_;
        zU_ += alpha_dual * dzU_;
        clip_duals();
        log_line(0.0);
        continue;
      }
      if (!have_dir) {
        if (auto out = handle_stall()) return *out;
        continue;
      }
      dual_only_steps_ = 0;

      const scalar_t alpha_pri_max = max_primal_step();
      const scalar_t alpha_dual = max_dual_step();
      if (std::getenv("OPFGAP_DEBUG_KKT") && iter_ >= 100 && iter_ <= 104) {
        index_t blk = -1;
        scalar_t bg = 0, bdx = 0, bz = 0;
        scalar_t a = 1.0;
        for (index_t i = 0; i < n_; ++i) {
          if (has_lb_[static_cast<std::size_t>(i)] && dx_[i] < 0.0) {
            const scalar_t cand = -tau() * (x_[i] - lower_[i]) / dx_[i];
            if (cand < a) { a = cand; blk = i; bg = x_[i] - lower_[i]; bdx = dx_[i]; bz = zL_[i]; }
          }
          if (has_ub_[static_cast<std::size_t>(i)] && dx_[i] > 0.0) {
            const scalar_t cand = tau() * (upper_[i] - x_[i]) / dx_[i];
            if (cand < a) { a = cand; blk = i; bg = upper_[i] - x_[i]; bdx = dx_[i]; bz = zU_[i]; }
          }
        }
        std::fprintf(stderr,
                     "  [blk:%s] iter=%ld amax=%.3e adual=%.3e blk=%ld g=%.3e dx=%.3e z=%.3e\n",
                     prob_.tag.c_str(), static_cast<long>(iter_), alpha_pri_max, alpha_dual,
                     static_cast<long>(blk), bg, bdx, bz);
      }
      if (alpha_pri_max < 1e-10) {
        if (auto out = handle_stall()) return *out;
        continue;
      }

      const scalar_t phi0 = merit(x_, s_);
      scalar_t alpha = alpha_pri_max;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        const vector_t xt = x_ + alpha * dx_;
        const vector_t st = s_ + alpha * ds_;
        const scalar_t phit = merit(xt, st);
        if (finite(phit) && phit <= phi0 + kArmijoC1 * alpha * dphi) {
          x_ = xt;
          s_ = st;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (auto out = handle_stall()) return *out;
        continue;
      }
      if (alpha < 1e-10) {
        if (++tiny_steps_ >= 8) {
          tiny_steps_ = 0;
          if (auto out = handle_stall()) return *out;
          continue;
        }
      } else {
        tiny_steps_ = 0;
      }

      yE_ += alpha * dyE_;
      yI_ += alpha_dual * dyI_;
      zL_ += alpha_dual * dzL_;
      zU_ += alpha_dual * dzU_;
      clip_duals();
      if (alpha < 1e-3) {
        if (++small_steps_ >= 6) {
          small_steps_ = 0;
          rescue_pending_ = true;
        }
      } else {
        small_steps_ = 0;
      }
      log_line(alpha);
    }
    return finish(SolveStatus::iteration_limit);
  }

 private:
  // ---- setup -------------------------------------------------------------

  void prepare() {
    n_ = prob_.num_vars();
    has_lb_.assign(static_cast<std::size_t>(n_), false);
    has_ub_.assign(static_cast<std::size_t>(n_), false);
    lower_ = vector_t::Constant(n_, -kUnbounded);
    upper_ = vector_t::Constant(n_, kUnbounded);
    for (index_t i = 0; i < n_; ++i) {
      const Variable& v = prob_.variables[static_cast<std::size_t>(i)];
      if (v.upper - v.lower <= 1e-12) {
        // Fixed variable: pinned by an equality row, no barrier.
        Expr pin = Expr::variable(i);
        pin.add_constant(-0.5 * (v.lower + v.upper));
        pins_.push_back(std::move(pin));
        continue;
      }
      if (v.lower > -kUnbounded) {
        has_lb_[static_cast<std::size_t>(i)] = true;
        lower_[i] = v.lower;
      }
      if (v.upper < kUnbounded) {
        has_ub_[static_cast<std::size_t>(i)] = true;
        upper_[i] = v.upper;
      }
    }
    for (const auto& c : prob_.equalities) eqs_.push_back(&c.expr);
    for (const auto& e : pins_) eqs_.push_back(&e);
    for (const auto& c : prob_.inequalities) ineqs_.push_back(&c.expr);
    mE_ = static_cast<index_t>(eqs_.size());
    mI_ = static_cast<index_t>(ineqs_.size());
    dim_ = n_ + mE_ + mI_;

    suppE_.reserve(eqs_.size());
    for (const Expr* e : eqs_) suppE_.push_back(e->variables());
    suppI_.reserve(ineqs_.size());
    for (const Expr* e : ineqs_) suppI_.push_back(e->variables());
  }

  void initialize() {
    x_ = prob_.initial_point();
    for (index_t i = 0; i < n_; ++i) {
      const Variable& v = prob_.variables[static_cast<std::size_t>(i)];
      if (v.upper - v.lower <= 1e-12) {
        x_[i] = 0.5 * (v.lower + v.upper);
        continue;
      }
      // Push strictly inside finite bounds.
      if (has_lb_[static_cast<std::size_t>(i)] && has_ub_[static_cast<std::size_t>(i)]) {
        const scalar_t pad = std::min(1e-2 * std::max(scalar_t(1), std::abs(lower_[i])),
                                      1e-2 * (upper_[i] - lower_[i]));
        x_[i] = std::min(std::max(x_[i], lower_[i] + pad), upper_[i] - pad);
      } else if (has_lb_[static_cast<std::size_t>(i)]) {
        x_[i] = std::max(x_[i], lower_[i] + 1e-2 * std::max(scalar_t(1), std::abs(lower_[i])));
      } else if (has_ub_[static_cast<std::size_t>(i)]) {
        x_[i] = std::min(x_[i], upper_[i] - 1e-2 * std::max(scalar_t(1), std::abs(upper_[i])));
      }
    }

    vector_t ci(mI_);
    for (index_t k = 0; k < mI_; ++k) ci[k] = ineqs_[static_cast<std::size_t>(k)]->value(x_);
    s_ = vector_t::Ones(mI_);
    for (index_t k = 0; k < mI_; ++k) s_[k] = std::max(scalar_t(1e-4), -ci[k]);

    const scalar_t mu0 = opts_.initial_barrier;
    yE_ = vector_t::Zero(mE_);
    yI_ = vector_t::Zero(mI_);
    for (index_t k = 0; k < mI_; ++k) {
      yI_[k] = std::min(std::max(mu0 / s_[k], scalar_t(1e-6)), scalar_t(1e6));
    }
    zL_ = vector_t::Zero(n_);
    zU_ = vector_t::Zero(n_);
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        zL_[i] = std::min(std::max(mu0 / (x_[i] - lower_[i]), scalar_t(1e-6)), scalar_t(1e6));
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        zU_[i] = std::min(std::max(mu0 / (upper_[i] - x_[i]), scalar_t(1e-6)), scalar_t(1e6));
      }
    }
  }

  // ---- evaluation ----------------------------------------------------------

  void eval_iterate() {
    f_ = prob_.objective.value(x_);
    grad_ = vector_t::Zero(n_);
    prob_.objective.add_gradient(x_, 1.0, grad_);

    cE_.resize(mE_);
    JE_.clear();
    vector_t scratch = vector_t::Zero(n_);
    for (index_t k = 0; k < mE_; ++k) {
      const Expr& e = *eqs_[static_cast<std::size_t>(k)];
      cE_[k] = e.value(x_);
      e.add_gradient(x_, 1.0, scratch);
      for (index_t j : suppE_[static_cast<std::size_t>(k)]) {
        JE_.emplace_back(k, j, scratch[j]);
        scratch[j] = 0.0;
      }
    }
    cI_.resize(mI_);
    JI_.clear();
    for (index_t k = 0; k < mI_; ++k) {
      const Expr& e = *ineqs_[static_cast<std::size_t>(k)];
      cI_[k] = e.value(x_);
      e.add_gradient(x_, 1.0, scratch);
      for (index_t j : suppI_[static_cast<std::size_t>(k)]) {
        JI_.emplace_back(k, j, scratch[j]);
        scratch[j] = 0.0;
      }
    }
  }

  /** grad_f + JE^T yE + JI^T yI - zL + zU. */
  vector_t stationarity() const {
    vector_t r = grad_;
    for (const auto& t : JE_) r[t.col()] += t.value() * yE_[t.row()];
    for (const auto& t : JI_) r[t.col()] += t.value() * yI_[t.row()];
    r -= zL_;
    r += zU_;
    return r;
  }

  scalar_t kkt_error(scalar_t mu) const {
    index_t n_mult = mE_ + mI_;
    scalar_t mult_mass = yE_.lpNorm<1>() + yI_.lpNorm<1>();
    index_t n_z = 0;
    scalar_t z_mass = 0.0;
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        ++n_z;
        z_mass += zL_[i];
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        ++n_z;
        z_mass += zU_[i];
      }
    }
    const scalar_t sd =
        std::max(scalar_t(100), (mult_mass + z_mass) / std::max<index_t>(1, n_mult + n_z)) / 100.0;
    const scalar_t sc = std::max(scalar_t(100), (z_mass + yI_.lpNorm<1>()) /
                                                    std::max<index_t>(1, n_z + mI_)) /
                        100.0;

    scalar_t err = stationarity().lpNorm<Eigen::Infinity>() / sd;
    if (mE_ > 0) err = std::max(err, cE_.lpNorm<Eigen::Infinity>());
    for (index_t k = 0; k < mI_; ++k) {
      err = std::max(err, std::abs(cI_[k] + s_[k]));
      err = std::max(err, std::abs(s_[k] * yI_[k] - mu) / sc);
    }
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        err = std::max(err, std::abs((x_[i] - lower_[i]) * zL_[i] - mu) / sc);
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        err = std::max(err, std::abs((upper_[i] - x_[i]) * zU_[i] - mu) / sc);
      }
    }
    return err;
  }

  // ---- Newton direction ----------------------------------------------------

  bool compute_direction(int escalate) {
    std::vector<triplet_t> kkt;
    prob_.objective.add_hessian(x_, 1.0, kkt);
    for (index_t k = 0; k < mE_; ++k) {
      eqs_[static_cast<std::size_t>(k)]->add_hessian(x_, yE_[k], kkt);
    }
    for (index_t k = 0; k < mI_; ++k) {
      ineqs_[static_cast<std::size_t>(k)]->add_hessian(x_, yI_[k], kkt);
    }
    for (const auto& t : JE_) {
      kkt.emplace_back(n_ + t.row(), t.col(), t.value());
      kkt.emplace_back(t.col(), n_ + t.row(), t.value());
    }
    for (const auto& t : JI_) {
      kkt.emplace_back(n_ + mE_ + t.row(), t.col(), t.value());
      kkt.emplace_back(t.col(), n_ + mE_ + t.row(), t.value());
    }

    vector_t rhs(dim_);
    {
      vector_t rx = grad_;
      for (const auto& t : JE_) rx[t.col()] += t.value() * yE_[t.row()];
      for (const auto& t : JI_) rx[t.col()] += t.value() * yI_[t.row()];
      for (index_t i = 0; i < n_; ++i) {
        if (has_lb_[static_cast<std::size_t>(i)]) rx[i] -= mu_ / (x_[i] - lower_[i]);
        if (has_ub_[static_cast<std::size_t>(i)]) rx[i] += mu_ / (upper_[i] - x_[i]);
      }
      rhs.head(n_) = -rx;
      rhs.segment(n_, mE_) = -cE_;
      for (index_t k = 0; k < mI_; ++k) {
        rhs[n_ + mE_ + k] = -cI_[k] - mu_ / yI_[k];
      }
    }

    // Two failure modes, two remedies. The unpivoted LDLt breaks down (or
    // returns a ~zero pivot) when elimination meets the zero constraint
    // diagonal: a small dual shift -delta_c makes the matrix quasidefinite,
    // which factors in any order, so breakdowns bump delta_c. A clean
    // factorization with the wrong sign count is actual curvature trouble
    // and climbs delta_w. Trusting the sign count only after a clean
    // factorization matters: a barely-completed indefinite factorization is
    // exactly the one whose inertia comes out garbled. Both shifts are
    // remembered across iterations (with decay) so a persistently
    // degenerate problem does not re-diagnose itself from scratch each step.
    scalar_t delta_w = escalate == 0 ? 0.0 : ramp_delta(escalate);
    scalar_t delta_c = delta_c_last_;
    bool bumped_c = false;
    for (int tries = 0; tries < 48; ++tries) {
      std::vector<triplet_t> full(kkt.begin(), kkt.end());
      for (index_t i = 0; i < n_; ++i) {
        scalar_t sigma = delta_w;
        if (has_lb_[static_cast<std::size_t>(i)]) sigma += zL_[i] / (x_[i] - lower_[i]);
        if (has_ub_[static_cast<std::size_t>(i)]) sigma += zU_[i] / (upper_[i] - x_[i]);
        full.emplace_back(i, i, sigma);
      }
      for (index_t k = 0; k < mI_; ++k) {
        full.emplace_back(n_ + mE_ + k, n_ + mE_ + k, -s_[k] / yI_[k]);
      }
      sparse_t target(dim_, dim_);
      target.setFromTriplets(full.begin(), full.end());
      sparse_t K = target;
      if (delta_c > 0.0) {
        std::vector<triplet_t> shift;
        shift.reserve(static_cast<std::size_t>(mE_ + mI_));
        for (index_t k = 0; k < mE_ + mI_; ++k) shift.emplace_back(n_ + k, n_ + k, -delta_c);
        sparse_t S(dim_, dim_);
        S.setFromTriplets(shift.begin(), shift.end());
        K = target + S;
      }

      ldlt_.compute(K);
      bool breakdown = ldlt_.info() != Eigen::Success;
      index_t neg = 0;
      if (!breakdown) {
        const auto& d = ldlt_.vectorD();
        for (index_t i = 0; i < d.size(); ++i) {
          if (!finite(d[i]) || std::abs(d[i]) < 1e-300) breakdown = true;
          if (d[i] < 0) ++neg;
        }
      }
      if (std::getenv("OPFGAP_DEBUG_KKT")) {
        std::fprintf(stderr,
                     "  [kkt:%s] iter=%ld try=%d dw=%.2e dc=%.2e bd=%d neg=%ld want=%ld\n",
                     prob_.tag.c_str(), static_cast<long>(iter_), tries, delta_w, delta_c,
                     breakdown ? 1 : 0, static_cast<long>(neg), static_cast<long>(mE_ + mI_));
      }
      if (breakdown) {
        // Quasidefiniteness needs both a strictly negative constraint
        // diagonal and a strictly positive Hessian diagonal.
        delta_c = std::max(10.0 * delta_c, scalar_t(1e-8));
        delta_w = std::max(8.0 * delta_w, opts_.regularization_floor);
        continue;
      }
      if (neg != mE_ + mI_) {
        delta_w = delta_w == 0.0 ? std::max(opts_.regularization_floor,
                                            delta_last_ > 0.0 ? delta_last_ / 3.0 : scalar_t(1e-4))
                                 : delta_w * 8.0;
        if (delta_w > 1e12) {
          if (bumped_c) break;
          delta_c = std::max(1e-8 * std::max(scalar_t(1), mu_), 10.0 * delta_c);
          delta_w = 0.0;
          bumped_c = true;
        }
        continue;
      }
      vector_t sol = ldlt_.solve(rhs);
      if (!sol.allFinite()) {
        delta_c = std::max(10.0 * delta_c, scalar_t(1e-8));
        delta_w = std::max(8.0 * delta_w, opts_.regularization_floor);
        continue;
      }
      // Trust but verify: a factorization can complete with plausible signs
      // yet carry a collapsed pivot whose solve is garbage. The residual
      // exposes that case for the price of one matrix-vector product.
      const scalar_t residual = refine(target, rhs, sol);
      if (std::getenv("OPFGAP_DEBUG_KKT")) {
        std::fprintf(stderr, "  [sol:%s] iter=%ld res=%.2e |rhs|=%.2e |sol|=%.2e\n",
                     prob_.tag.c_str(), static_cast<long>(iter_), residual, rhs.norm(),
                     sol.norm());
      }
      if (!(residual <= 1e-6 * std::max(scalar_t(1), rhs.norm()))) {
        delta_c = std::max(10.0 * delta_c, scalar_t(1e-8));
        delta_w = std::max(8.0 * delta_w, opts_.regularization_floor);
        continue;
      }
      dx_ = sol.head(n_);
      dyE_ = sol.segment(n_, mE_);
      dyI_ = sol.tail(mI_);
      recover_steps();
      if (delta_w > 0.0) delta_last_ = delta_w;
      delta_c_last_ = delta_c / 10.0;
      if (delta_c_last_ < 1e-14) delta_c_last_ = 0.0;
      return true;
    }
    return false;
  }

  /** A round or two of iterative refinement against the factored matrix;
   *  element growth in the unpivoted factorization can otherwise cost most
   *  of the direction's digits near degenerate points. */
  scalar_t refine(const sparse_t& K, const vector_t& rhs, vector_t& sol) const {
    const scalar_t scale = std::max(scalar_t(1), rhs.norm());
    scalar_t best = (rhs - K * sol).norm();
    for (int round = 0; round < 2 && best > 1e-12 * scale; ++round) {
      const vector_t corr = ldlt_.solve(rhs - K * sol);
      if (!corr.allFinite()) return best;
      const vector_t cand = sol + corr;
      const scalar_t residual = (rhs - K * cand).norm();
      if (residual >= best) return best;
      sol = cand;
      best = residual;
    }
    return best;
  }

  scalar_t ramp_delta(int escalate) const {
    scalar_t d = delta_last_ > 0.0 ? delta_last_ : 1e-4;
    for (int i = 0; i < escalate; ++i) d *= 100.0;
    return std::max(d, opts_.regularization_floor);
  }

  void recover_steps() {
    ds_.resize(mI_);
    for (index_t k = 0; k < mI_; ++k) ds_[k] = -(cI_[k] + s_[k]);
    for (const auto& t : JI_) ds_[t.row()] -= t.value() * dx_[t.col()];

    dzL_ = vector_t::Zero(n_);
    dzU_ = vector_t::Zero(n_);
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        const scalar_t g = x_[i] - lower_[i];
        dzL_[i] = mu_ / g - zL_[i] - zL_[i] * dx_[i] / g;
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        const scalar_t g = upper_[i] - x_[i];
        dzU_[i] = mu_ / g - zU_[i] + zU_[i] * dx_[i] / g;
      }
    }
  }

  // ---- merit, steps, updates ------------------------------------------------

  scalar_t barrier(const vector_t& x, const vector_t& s) const {
    scalar_t b = 0.0;
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        const scalar_t g = x[i] - lower_[i];
        if (g <= 0.0) return -std::numeric_limits<scalar_t>::infinity();
        b += std::log(g);
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        const scalar_t g = upper_[i] - x[i];
        if (g <= 0.0) return -std::numeric_limits<scalar_t>::infinity();
        b += std::log(g);
      }
    }
    for (index_t k = 0; k < mI_; ++k) {
      if (s[k] <= 0.0) return -std::numeric_limits<scalar_t>::infinity();
      b += std::log(s[k]);
    }
    return b;
  }

  scalar_t violation_l1(const vector_t& x, const vector_t& s) const {
    scalar_t v = 0.0;
    for (index_t k = 0; k < mE_; ++k) v += std::abs(eqs_[static_cast<std::size_t>(k)]->value(x));
    for (index_t k = 0; k < mI_; ++k) {
      v += std::abs(ineqs_[static_cast<std::size_t>(k)]->value(x) + s[k]);
    }
    return v;
  }

  scalar_t merit(const vector_t& x, const vector_t& s) const {
    const scalar_t b = barrier(x, s);
    if (!finite(b)) return std::numeric_limits<scalar_t>::infinity();
    const scalar_t f = prob_.objective.value(x);
    if (!finite(f)) return std::numeric_limits<scalar_t>::infinity();
    return f + nu_ * violation_l1(x, s) - mu_ * b;
  }

  /** Also raises nu so the direction is a descent for the merit function. */
  scalar_t directional_derivative() {
    scalar_t g = grad_.dot(dx_);
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) g -= mu_ * dx_[i] / (x_[i] - lower_[i]);
      if (has_ub_[static_cast<std::size_t>(i)]) g += mu_ * dx_[i] / (upper_[i] - x_[i]);
    }
    for (index_t k = 0; k < mI_; ++k) g -= mu_ * ds_[k] / s_[k];
    const scalar_t theta = violation_l1(x_, s_);
    if (theta > 1e-14) {
      // Newton linearizes constraints to zero, so the violation term drops
      // at rate theta; pick nu large enough to dominate.
      const scalar_t needed = g / (0.5 * theta);
      if (needed > nu_) nu_ = std::min(needed + 1.0, scalar_t(1e12));
      return g - nu_ * theta;
    }
    return g;
  }

  /** Fraction-to-the-boundary margin; approaches 1 with the barrier so the
   *  endgame is not forced into a crawl along nearly-active bounds. */
  scalar_t tau() const { return std::max(kTauMin, 1.0 - mu_); }

  scalar_t max_primal_step() const {
    const scalar_t tau_ = tau();
    scalar_t a = 1.0;
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)] && dx_[i] < 0.0) {
        a = std::min(a, -tau_ * (x_[i] - lower_[i]) / dx_[i]);
      }
      if (has_ub_[static_cast<std::size_t>(i)] && dx_[i] > 0.0) {
        a = std::min(a, tau_ * (upper_[i] - x_[i]) / dx_[i]);
      }
    }
    for (index_t k = 0; k < mI_; ++k) {
      if (ds_[k] < 0.0) a = std::min(a, -tau_ * s_[k] / ds_[k]);
    }
    return a;
  }

  scalar_t max_dual_step() const {
    const scalar_t tau_ = tau();
    scalar_t a = 1.0;
    for (index_t k = 0; k < mI_; ++k) {
      if (dyI_[k] < 0.0) a = std::min(a, -tau_ * yI_[k] / dyI_[k]);
    }
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)] && dzL_[i] < 0.0) {
        a = std::min(a, -tau_ * zL_[i] / dzL_[i]);
      }
      if (has_ub_[static_cast<std::size_t>(i)] && dzU_[i] < 0.0) {
        a = std::min(a, -tau_ * zU_[i] / dzU_[i]);
      }
    }
    return a;
  }

  void clip_duals() {
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        const scalar_t g = x_[i] - lower_[i];
        zL_[i] = std::min(std::max(zL_[i], mu_ / (kSigmaCap * g)), kSigmaCap * mu_ / g);
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        const scalar_t g = upper_[i] - x_[i];
        zU_[i] = std::min(std::max(zU_[i], mu_ / (kSigmaCap * g)), kSigmaCap * mu_ / g);
      }
    }
    for (index_t k = 0; k < mI_; ++k) {
      yI_[k] = std::min(std::max(yI_[k], mu_ / (kSigmaCap * s_[k])), kSigmaCap * mu_ / s_[k]);
    }
  }

  /** Restart the dual side at the current point: bound and slack duals onto
   *  a tight central band, equality multipliers from least squares. The
   *  merit line search scales the equality-multiplier step by the primal
   *  alpha, so a long run of tiny accepted steps can leave the duals frozen
   *  far from where the primal iterate needs them. */
  void rescue_duals() {
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        const scalar_t g = x_[i] - lower_[i];
        zL_[i] = std::min(std::max(zL_[i], mu_ / (10.0 * g)), 10.0 * mu_ / g);
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        const scalar_t g = upper_[i] - x_[i];
        zU_[i] = std::min(std::max(zU_[i], mu_ / (10.0 * g)), 10.0 * mu_ / g);
      }
    }
    for (index_t k = 0; k < mI_; ++k) {
      yI_[k] = std::min(std::max(yI_[k], mu_ / (10.0 * s_[k])), 10.0 * mu_ / s_[k]);
    }
    if (mE_ == 0) return;

    vector_t r = grad_;
    for (const auto& t : JI_) r[t.col()] += t.value() * yI_[t.row()];
    r -= zL_;
    r += zU_;
    std::vector<triplet_t> at;
    at.reserve(JE_.size());
    for (const auto& t : JE_) at.emplace_back(t.col(), t.row(), t.value());
    sparse_t A(n_, mE_);  // JE transposed; solve min |A yE + r|
    A.setFromTriplets(at.begin(), at.end());
    sparse_t N = sparse_t(A.transpose()) * A;
    for (index_t k = 0; k < mE_; ++k) N.coeffRef(k, k) += 1e-10;
    Eigen::SimplicialLDLT<sparse_t> ls(N);
    if (ls.info() != Eigen::Success) return;
    const vector_t ye = ls.solve(-A.transpose() * r);
    if (ye.allFinite()) yE_ = ye;
  }

  void log_line(scalar_t alpha) const {
    if (!opts_.log) return;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "iter %4ld  obj % .8e  pinf %.3e  dinf %.3e  mu %.3e  alpha %.3e  nu %.1e"
                  "  dw %.1e  dc %.1e",
                  static_cast<long>(iter_), f_, primal_infeasibility(),
                  stationarity().lpNorm<Eigen::Infinity>(), mu_, alpha, nu_, delta_last_,
                  delta_c_last_);
    opts_.log(buf);
  }

  scalar_t primal_infeasibility() const {
    scalar_t v = mE_ > 0 ? cE_.lpNorm<Eigen::Infinity>() : 0.0;
    for (index_t k = 0; k < mI_; ++k) v = std::max(v, std::max(cI_[k], scalar_t(0)));
    return v;
  }

  scalar_t elapsed() const {
    return std::chrono::duration<scalar_t>(std::chrono::steady_clock::now() - start_).count();
  }

  // ---- restoration -----------------------------------------------------------

  /** Line search or factorization failed. Try restoration; nullopt resumes. */
  std::optional<SolveOutcome> handle_stall() {
    if (depth_ > 0) return finish(SolveStatus::numeric_failure);
    if (++restorations_ > 2) return finish(SolveStatus::numeric_failure);

    NlpProblem elastic;
    elastic.tag = prob_.tag + " [restoration]";
    elastic.variables = prob_.variables;
    for (index_t i = 0; i < n_; ++i) {
      elastic.variables[static_cast<std::size_t>(i)].init =
          std::min(std::max(x_[i], prob_.variables[static_cast<std::size_t>(i)].lower),
                   prob_.variables[static_cast<std::size_t>(i)].upper);
    }
    Expr objective;
    // Tiny proximal pull keeps the restored point near the iterate.
    for (index_t i = 0; i < n_; ++i) {
      objective.add_quad(i, i, 0.5e-8);
      objective.add_linear(i, -1e-8 * x_[i]);
      objective.add_constant(0.5e-8 * x_[i] * x_[i]);
    }
    index_t next = n_;
    const index_t mE_orig = static_cast<index_t>(prob_.equalities.size());
    for (index_t k = 0; k < mE_orig; ++k) {
      const scalar_t c0 = prob_.equalities[static_cast<std::size_t>(k)].expr.value(x_);
      Expr row = prob_.equalities[static_cast<std::size_t>(k)].expr;
      row.add_linear(next, -1.0);      // positive elastic
      row.add_linear(next + 1, 1.0);   // negative elastic
      elastic.variables.push_back({"p", 0.0, kUnbounded, std::max(c0, scalar_t(0)) + 1e-3});
      elastic.variables.push_back({"n", 0.0, kUnbounded, std::max(-c0, scalar_t(0)) + 1e-3});
      objective.add_linear(next, 1.0).add_linear(next + 1, 1.0);
      elastic.equalities.push_back({prob_.equalities[static_cast<std::size_t>(k)].name, row});
      next += 2;
    }
    for (index_t k = 0; k < mI_; ++k) {
      const scalar_t c0 = prob_.inequalities[static_cast<std::size_t>(k)].expr.value(x_);
      Expr row = prob_.inequalities[static_cast<std::size_t>(k)].expr;
      row.add_linear(next, -1.0);
      elastic.variables.push_back({"q", 0.0, kUnbounded, std::max(c0, scalar_t(0)) + 1e-3});
      objective.add_linear(next, 1.0);
      elastic.inequalities.push_back({prob_.inequalities[static_cast<std::size_t>(k)].name, row});
      ++next;
    }
    elastic.objective = std::move(objective);

    SolverOptions sub = opts_;
    sub.log = nullptr;
    if (std::getenv("OPFGAP_DEBUG_KKT")) {
      sub.log = [](const std::string& line) { std::fprintf(stderr, "    | %s\n", line.c_str()); };
    }
    sub.kkt_tolerance = std::min(opts_.kkt_tolerance, scalar_t(1e-8));
    if (opts_.time_limit_s > 0.0) {
      sub.time_limit_s = std::max(opts_.time_limit_s - elapsed(), scalar_t(0.1));
    }
    const SolveOutcome rest = Ipm(elastic, sub, depth_ + 1).run();
    if (std::getenv("OPFGAP_DEBUG_KKT")) {
      std::fprintf(stderr, "  [rest:%s] status=%d obj=%.6e iters=%ld kkt=%.2e viol=%.2e\n",
                   prob_.tag.c_str(), static_cast<int>(rest.status), rest.objective,
                   static_cast<long>(rest.iterations), rest.kkt_error,
                   rest.constraint_violation);
    }
    if (rest.status != SolveStatus::optimal) return finish(SolveStatus::numeric_failure);

    scalar_t violation = 0.0;
    for (index_t j = n_; j < static_cast<index_t>(elastic.variables.size()); ++j) {
      violation += rest.x[j];
    }
    if (violation > kRestorationTol) {
      infeasibility_measure_ = violation;
      return finish(SolveStatus::locally_infeasible);
    }

    // Feasible point recovered: restart the interior iteration from it.
    x_ = rest.x.head(n_);
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        x_[i] = std::max(x_[i], lower_[i] + 1e-8 * std::max(scalar_t(1), std::abs(lower_[i])));
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        x_[i] = std::min(x_[i], upper_[i] - 1e-8 * std::max(scalar_t(1), std::abs(upper_[i])));
      }
    }
    for (index_t k = 0; k < mI_; ++k) {
      const scalar_t c = ineqs_[static_cast<std::size_t>(k)]->value(x_);
      s_[k] = std::max(scalar_t(1e-8), -c);
      yI_[k] = std::min(std::max(mu_ / s_[k], scalar_t(1e-6)), scalar_t(1e6));
    }
    yE_.setZero();
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) {
        zL_[i] = std::min(std::max(mu_ / (x_[i] - lower_[i]), scalar_t(1e-6)), scalar_t(1e6));
      }
      if (has_ub_[static_cast<std::size_t>(i)]) {
        zU_[i] = std::min(std::max(mu_ / (upper_[i] - x_[i]), scalar_t(1e-6)), scalar_t(1e6));
      }
    }
    nu_ = 1.0;
    delta_last_ = 0.0;
    delta_c_last_ = 0.0;
    return std::nullopt;
  }

  // ---- exit -------------------------------------------------------------------

  SolveOutcome finish(SolveStatus status) {
    SolveOutcome out;
    out.status = status;
    out.objective = prob_.objective.value(x_);
    out.x = x_;
    out.slacks = s_;
    out.y_equality = yE_.head(static_cast<index_t>(prob_.equalities.size()));
    out.y_inequality = yI_;
    out.z_lower = zL_;
    out.z_upper = zU_;
    out.iterations = iter_;
    out.wall_time_s = elapsed();
    out.kkt_error = last_kkt_;

    vector_t ce(mE_), ci(mI_);
    for (index_t k = 0; k < mE_; ++k) ce[k] = eqs_[static_cast<std::size_t>(k)]->value(x_);
    for (index_t k = 0; k < mI_; ++k) ci[k] = ineqs_[static_cast<std::size_t>(k)]->value(x_);
    scalar_t viol = mE_ > 0 ? ce.lpNorm<Eigen::Infinity>() : 0.0;
    for (index_t k = 0; k < mI_; ++k) viol = std::max(viol, std::max(ci[k], scalar_t(0)));
    out.constraint_violation = viol;

    scalar_t comp = 0.0;
    for (index_t i = 0; i < n_; ++i) {
      if (has_lb_[static_cast<std::size_t>(i)]) comp += zL_[i] * (x_[i] - lower_[i]);
      if (has_ub_[static_cast<std::size_t>(i)]) comp += zU_[i] * (upper_[i] - x_[i]);
    }
    for (index_t k = 0; k < mI_; ++k) comp += yI_[k] * s_[k];
    out.dual_objective = out.objective - comp;

    if (status == SolveStatus::locally_infeasible) {
      out.infeasibility_measure = infeasibility_measure_;
      out.infeasibility_proved = prob_.convex;
    }
    return out;
  }

  const NlpProblem& prob_;
  SolverOptions opts_;
  int depth_ = 0;

  index_t n_ = 0, mE_ = 0, mI_ = 0, dim_ = 0;
  std::vector<Expr> pins_;
  std::vector<const Expr*> eqs_, ineqs_;
  std::vector<std::vector<index_t>> suppE_, suppI_;
  std::vector<bool> has_lb_, has_ub_;
  vector_t lower_, upper_;

  vector_t x_, s_, yE_, yI_, zL_, zU_;
  scalar_t mu_ = 0.1, nu_ = 1.0;
  scalar_t f_ = 0.0;
  vector_t grad_, cE_, cI_;
  std::vector<triplet_t> JE_, JI_;
  vector_t dx_, ds_, dyE_, dyI_, dzL_, dzU_;
  Eigen::SimplicialLDLT<sparse_t> ldlt_;
  scalar_t delta_last_ = 0.0;
  scalar_t delta_c_last_ = 0.0;
  int tiny_steps_ = 0;
  int dual_only_steps_ = 0;
  int small_steps_ = 0;
  bool rescue_pending_ = false;
  scalar_t last_kkt_ = std::numeric_limits<scalar_t>::infinity();
  scalar_t infeasibility_measure_ = 0.0;
  int restorations_ = 0;
  index_t iter_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

IpmSolver::IpmSolver(SolverOptions options) : options_(std::move(options)) {
  if (!(options_.kkt_tolerance > 0.0)) throw ValidationError("kkt_tolerance must be positive");
  if (!(options_.barrier_reduction > 0.0) || !(options_.barrier_reduction < 1.0)) {
    throw ValidationError("barrier_reduction must lie in (0, 1)");
  }
}

SolveOutcome IpmSolver::solve(const NlpProblem& problem) const {
  return Ipm(problem, options_, 0).run();
}

scalar_t check_derivatives(const NlpProblem& problem, const vector_t& point) {
  problem.validate();
  if (point.size() != problem.num_vars()) {
    throw ValidationError("check point has wrong dimension");
  }
  std::vector<const Expr*> exprs{&problem.objective};
  for (const auto& c : problem.equalities) exprs.push_back(&c.expr);
  for (const auto& c : problem.inequalities) exprs.push_back(&c.expr);

  scalar_t worst = 0.0;
  vector_t grad = vector_t::Zero(problem.num_vars());
  for (const Expr* e : exprs) {
    grad.setZero();
    e->add_gradient(point, 1.0, grad);
    for (index_t i : e->variables()) {
      const scalar_t h = 1e-6 * std::max(scalar_t(1), std::abs(point[i]));
      vector_t xp = point, xm = point;
      xp[i] += h;
      xm[i] -= h;
      const scalar_t fd = (e->value(xp) - e->value(xm)) / (2.0 * h);
      const scalar_t rel = std::abs(grad[i] - fd) /
                           std::max({scalar_t(1), std::abs(grad[i]), std::abs(fd)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace opfgap
