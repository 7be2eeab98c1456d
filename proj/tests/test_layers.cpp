#include <doctest.h>

#include "magtomo/pipeline.hpp"

#include <cmath>

using namespace magtomo;

namespace {

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

ChartGeometry ball(double B) {
  ChartGeometry g = euclidean_geometry(3);
  set_boundary_ball(g, 1.0);
  if (B != 0.0) set_field_constant(g, B);
  g.bbox_lo = Vec::Constant(3, -1.1);
  g.bbox_hi = Vec::Constant(3, 1.1);
  return g;
}

}  // namespace

TEST_CASE("blend weight is a C2 quintic step") {
  CHECK(blend_weight(0.3, 0.5, 0.2) == 1.0);
  CHECK(blend_weight(0.5, 0.5, 0.2) == 1.0);
  CHECK(blend_weight(0.7, 0.5, 0.2) == 0.0);
  CHECK(blend_weight(0.6, 0.5, 0.2) == doctest::Approx(0.5));
  CHECK(blend_weight(0.9, 0.5, 0.0) == 0.0);
  const double h = 1e-4;
  // cubic contact at both ends: 1 - w = 10 u^3 + ...
  CHECK(std::abs(blend_weight(0.5 + h, 0.5, 0.2) - 1.0) < 1.3e-9);
  CHECK(std::abs(blend_weight(0.7 - h, 0.5, 0.2)) < 1.3e-9);
  double prev = 1.0;
  for (int i = 1; i <= 20; ++i) {
    const double w = blend_weight(0.5 + 0.01 * i, 0.5, 0.2);
    CHECK(w <= prev);
    prev = w;
  }
}

TEST_CASE("radial schedule") {
  LayerSchedule s = LayerSchedule::radial(v3(0, 0, 0.1), {1.0, 0.8, 0.5});
  CHECK_NOTHROW(s.validate());
  CHECK(s.tau(v3(0.3, 0.4, 0.1)) == doctest::Approx(0.5));
  CHECK((s.grad_tau(v3(0, 2, 0.1)) - v3(0, 1, 0)).norm() < 1e-14);
  CHECK((s.level_point(0.8, v3(0, 0, 3)) - v3(0, 0, 0.9)).norm() < 1e-14);
  CHECK(s.overlap_width(1) == doctest::Approx(0.2));
  CHECK(s.overlap_width(2) == doctest::Approx(0.3));
  s.overlap = 0.05;
  CHECK(s.overlap_width(2) == 0.05);

  LayerSchedule bad = LayerSchedule::radial(Vec::Zero(3), {1.0, 1.0});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK_THROWS_AS(LayerSchedule::radial(Vec::Zero(3), {1.0}).validate(), ValidationError);
}

TEST_CASE("grid pair, restriction and grid integrand agree on nodes") {
  ChartGeometry g = ball(0.0);
  Grid grid = Grid::uniform(g.bbox_lo, g.bbox_hi, 9);
  for (Kind kind : {Kind::BF, Kind::HB}) {
    GridField f = radial_bump(kind, g, grid, Vec::Zero(3), 0.4, 1.0);
    LayerSpace plain = plain_space(kind, g, grid, [](const Vec& z) { return z.norm() < 1.0; });
    TensorPair p = grid_pair(kind, f);
    CHECK((sample_pair(plain, p) - restrict_grid(plain, f)).norm() <= 1e-12 * restrict_grid(plain, f).norm());
    Integrand gi = grid_integrand(kind, f);
    Integrand pi = as_integrand(p);
    const Vec v = v3(0.0, 0.6, 0.8);
    for (const Vec& z : {v3(0.1, 0.62, -0.3), v3(-0.5, 0.05, 0.4)}) CHECK(gi(z, v) == doctest::Approx(pi(z, v)));
  }
}

TEST_CASE("single-layer strip recovers a shell field without field lines") {
  ChartGeometry g = ball(0.0);
  LayerSchedule s = LayerSchedule::radial(Vec::Zero(3), {1.0, 0.7});
  LayerStripParams prm;
  prm.grid_n = 10;
  prm.n_points = 120;
  prm.n_radii = 4;
  prm.n_dirs = 4;
  prm.n_tilt = 2;
  const Grid grid = Grid::uniform(g.bbox_lo, g.bbox_hi, prm.grid_n);
  GridField truth = radial_bump(Kind::BF, g, grid, Vec::Zero(3), 0.75, 1.0);
  TensorPair pair = grid_pair(Kind::BF, truth);
  Integrand f = grid_integrand(Kind::BF, truth);
  LayerStripResult r = layer_strip(g, s, [f](const GeodesicPath& p) { return ray_transform(f, p); }, prm, &pair);
  REQUIRE(r.layers.size() == 1);
  CHECK(r.layers[0].rays > r.layers[0].dofs / 4);
  REQUIRE(r.global_error.has_value());
  MESSAGE("single-layer error " << *r.global_error);
  CHECK(*r.global_error < 0.1);
  CHECK(r.overlaps_consistent);
}
