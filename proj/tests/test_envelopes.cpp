#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "opfgap/envelopes.hpp"

using namespace opfgap;

namespace {

scalar_t cos_upper(const EnvelopeSet& env, scalar_t theta) {
  return 1.0 - env.cos_quad_coef * theta * theta;
}

}  // namespace

TEST_CASE("cosine envelope interpolates its endpoints") {
  const EnvelopeSet env = make_envelopes(0.7);
  CHECK(cos_upper(env, 0.0) == doctest::Approx(1.0));  // tight at zero
  CHECK(cos_upper(env, 0.7) == doctest::Approx(std::cos(0.7)).epsilon(1e-14));
  CHECK(cos_upper(env, -0.7) == doctest::Approx(std::cos(0.7)).epsilon(1e-14));
  CHECK(env.cos_lower == doctest::Approx(std::cos(0.7)));

  const EnvelopeSet mid = make_envelopes(M_PI / 6.0);
  const scalar_t truth = std::cos(0.3);
  CHECK(truth <= cos_upper(mid, 0.3) + 1e-12);
  CHECK(truth >= mid.cos_lower - 1e-12);
  CHECK(truth == doctest::Approx(0.955336).epsilon(1e-6));
}

TEST_CASE("trig envelopes contain the true functions on dense samples") {
  for (scalar_t angle_max : {0.1, M_PI / 4.0, 1.2, M_PI / 2.0}) {
    CAPTURE(angle_max);
    const EnvelopeSet env = make_envelopes(angle_max);
    for (int i = 0; i <= 1000; ++i) {
      const scalar_t theta = -angle_max + 2.0 * angle_max * i / 1000.0;
      const scalar_t c = std::cos(theta);
      CHECK(cos_upper(env, theta) - c >= -1e-9);
      CHECK(c - env.cos_lower >= -1e-9);
      const scalar_t s = std::sin(theta);
      CHECK(env.sin_slope * theta + env.sin_offset - s >= -1e-9);
      CHECK(s - (env.sin_slope * theta - env.sin_offset) >= -1e-9);
    }
  }
}

TEST_CASE("envelope domain is (0, pi/2]") {
  CHECK_THROWS_AS(make_envelopes(0.0), ValidationError);
  CHECK_THROWS_AS(make_envelopes(-0.3), ValidationError);
  CHECK_THROWS_AS(make_envelopes(1.8), ValidationError);
  CHECK_NOTHROW(make_envelopes(M_PI / 2.0));
}

TEST_CASE("McCormick quadruple bounds the product over its box") {
  const McCormickBox box{0.9, 1.1, -0.5, 0.8};
  const auto rows = mccormick_product(0, 1, 2, box);
  REQUIRE(rows.size() == 4);
  for (int ix = 0; ix <= 10; ++ix) {
    for (int iy = 0; iy <= 10; ++iy) {
      vector_t pt(3);
      pt[1] = box.xl + (box.xu - box.xl) * ix / 10.0;
      pt[2] = box.yl + (box.yu - box.yl) * iy / 10.0;
      pt[0] = pt[1] * pt[2];  // the true product must stay feasible
      for (const auto& row : rows) CHECK(row.value(pt) <= 1e-12);
    }
  }

  // Outside the hull the quadruple cuts: z far above xy at a corner fails.
  vector_t bad(3);
  bad[1] = 0.9;
  bad[2] = -0.5;
  bad[0] = 0.9 * -0.5 + 0.3;
  bool violated = false;
  for (const auto& row : rows) violated |= row.value(bad) > 1e-9;
  CHECK(violated);

  CHECK_THROWS_AS(mccormick_product(0, 1, 2, McCormickBox{1.0, 0.5, 0.0, 1.0}), ValidationError);
}

TEST_CASE("degenerate McCormick box pins the exact linearization") {
  // x fixed at 1: rows must force z = y exactly.
  const auto rows = mccormick_product(0, 1, 2, McCormickBox{1.0, 1.0, -1.0, 1.0});
  for (scalar_t y : {-1.0, -0.25, 0.6, 1.0}) {
    vector_t on(3);
    on[1] = 1.0;
    on[2] = y;
    on[0] = y;
    for (const auto& row : rows) CHECK(row.value(on) <= 1e-12);
    vector_t off = on;
    off[0] = y + 0.01;
    bool cut = false;
    for (const auto& row : rows) cut |= row.value(off) > 1e-9;
    CHECK(cut);
    off[0] = y - 0.01;
    cut = false;
    for (const auto& row : rows) cut |= row.value(off) > 1e-9;
    CHECK(cut);
  }
}

TEST_CASE("square envelope sandwiches the parabola") {
  const scalar_t vl = 0.9, vu = 1.1;
  const auto rows = square_envelope(0, 1, vl, vu);
  REQUIRE(rows.size() == 2);
  for (int i = 0; i <= 20; ++i) {
    const scalar_t v = vl + (vu - vl) * i / 20.0;
    vector_t pt(2);
    pt[1] = v;
    pt[0] = v * v;
    for (const auto& row : rows) CHECK(row.value(pt) <= 1e-12);
  }
  // Between parabola and secant is feasible; outside either side is cut.
  vector_t pt(2);
  pt[1] = 1.0;
  pt[0] = 1.0 - 1e-3;  // below the parabola
  CHECK(rows[0].value(pt) > 0.0);
  pt[0] = (vl + vu) * 1.0 - vl * vu + 1e-3;  // above the secant
  CHECK(rows[1].value(pt) > 0.0);
}
