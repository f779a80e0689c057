#include "opfgap/envelopes.hpp"

#include <cmath>

namespace opfgap {

EnvelopeSet make_envelopes(scalar_t angle_max) {
  constexpr scalar_t half_pi = 1.5707963267948966;
  if (!(angle_max > 0.0) || angle_max > half_pi + 1e-12) {
    throw ValidationError("envelope interval must satisfy 0 < angle_max <= pi/2");
  }
  EnvelopeSet env;
  env.angle_max = angle_max;
  env.cos_quad_coef = (1.0 - std::cos(angle_max)) / (angle_max * angle_max);
  env.cos_lower = std::cos(angle_max);
  const scalar_t half = angle_max / 2.0;
  env.sin_slope = std::cos(half);
  env.sin_offset = std::sin(half) - env.sin_slope * half;
  return env;
}

std::vector<Expr> mccormick_product(index_t z, index_t x, index_t y, const McCormickBox& box) {
  if (!(box.xl <= box.xu) || !(box.yl <= box.yu)) {
    throw ValidationError("McCormick box has crossed bounds");
  }
  std::vector<Expr> rows;
  rows.reserve(4);
  auto under = [&](scalar_t cx, scalar_t cy) {  // z >= cx*y + cy*x - cx*cy
    Expr e;
    e.add_linear(y, cx).add_linear(x, cy).add_constant(-cx * cy).add_linear(z, -1.0);
    rows.push_back(std::move(e));
  };
  auto over = [&](scalar_t cx, scalar_t cy) {  // z <= cx*y + cy*x - cx*cy
    Expr e;
    e.add_linear(z, 1.0).add_linear(y, -cx).add_linear(x, -cy).add_constant(cx * cy);
    rows.push_back(std::move(e));
  };
  under(box.xl, box.yl);
  under(box.xu, box.yu);
  over(box.xl, box.yu);
  over(box.xu, box.yl);
  return rows;
}

std::vector<Expr> square_envelope(index_t w, index_t v, scalar_t vl, scalar_t vu) {
  if (!(vl <= vu)) throw ValidationError("square envelope has crossed bounds");
  std::vector<Expr> rows;
  rows.reserve(2);
  Expr convex;  // v^2 - w <= 0
  convex.add_quad(v, v, 1.0).add_linear(w, -1.0);
  rows.push_back(std::move(convex));
  Expr secant;  // w - (vl+vu) v + vl*vu <= 0
  secant.add_linear(w, 1.0).add_linear(v, -(vl + vu)).add_constant(vl * vu);
  rows.push_back(std::move(secant));
  return rows;
}

}  // namespace opfgap
