#pragma once

#include <vector>

#include "opfgap/expr.hpp"

namespace opfgap {

/** Convex envelope coefficients for cos/sin over a symmetric angle interval
 *  [-angle_max, angle_max], angle_max in (0, pi/2]. */
struct EnvelopeSet {
  scalar_t angle_max = 0.0;
  scalar_t cos_quad_coef = 0.0;  // c <= 1 - coef * theta^2
  scalar_t cos_lower = 0.0;      // c >= cos(angle_max)
  scalar_t sin_slope = 0.0;      // tangent slope cos(angle_max / 2)
  scalar_t sin_offset = 0.0;     // slope*theta - offset <= s <= slope*theta + offset
};

EnvelopeSet make_envelopes(scalar_t angle_max);

struct McCormickBox {
  scalar_t xl, xu, yl, yu;
};

/** Four linear rows (each <= 0) bounding variable z against the product x*y
 *  over the box. Degenerate boxes collapse to the exact linearization. */
std::vector<Expr> mccormick_product(index_t z, index_t x, index_t y, const McCormickBox& box);

/** Two rows (<= 0) sandwiching w against v^2 on [vl, vu]: the convex side
 *  v^2 <= w and the secant w <= (vl+vu) v - vl*vu. */
std::vector<Expr> square_envelope(index_t w, index_t v, scalar_t vl, scalar_t vu);

}  // namespace opfgap
