#include <doctest.h>

#include "magtomo/normalop.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace magtomo;

namespace {

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

ChartGeometry open_space(double B) {
  ChartGeometry g = euclidean_geometry(3);
  if (B != 0.0) set_field_constant(g, B);
  g.bbox_lo = Vec::Constant(3, -5.0);
  g.bbox_hi = Vec::Constant(3, 5.0);
  return g;
}

ChartGeometry ball(double r, double B) {
  ChartGeometry g = euclidean_geometry(3);
  set_boundary_ball(g, r);
  if (B != 0.0) set_field_constant(g, B);
  return g;
}

StepControl free_flight(double tol = 1e-10) {
  StepControl c;
  c.tol = tol;
  c.stop_at_boundary = false;
  return c;
}

double min_convexity(const ChartGeometry& g, int n_points, Vec* z_at = nullptr) {
  double lo = 1e300;
  for (const Vec& d : sphere_directions(3, n_points, 2)) {
    Vec z = project_to_boundary(g, d);
    BoundaryFrame fr = boundary_frame(g, z);
    for (int k = 0; k < 24; ++k) {
      const double a = std::numbers::pi * k / 12.0;
      Vec v = std::cos(a) * fr.tangent[0] + std::sin(a) * fr.tangent[1];
      const double q = magnetic_convexity(g, fr, v);
      if (q < lo) {
        lo = q;
        if (z_at) *z_at = z;
      }
    }
  }
  return lo;
}

}  // namespace

TEST_CASE("circular orbit of a constant field") {
  ChartGeometry g = open_space(1.0);
  const double pi = std::numbers::pi;
  GeodesicPath p = integrate(g, {Vec::Zero(3), v3(1, 0, 0)}, 0.0, pi, free_flight());
  const Vec end = p.states.back().z;
  CHECK(p.times.back() == doctest::Approx(pi));
  CHECK((end - v3(std::sin(pi), 1.0 - std::cos(pi), 0.0)).norm() <= 1e-8);
  CHECK(speed_drift(p) <= 1e-9);
  // dense output between samples
  const double t = 1.2345;
  CHECK((p.state_at(t).z - v3(std::sin(t), 1.0 - std::cos(t), 0.0)).norm() < 1e-7);
}

TEST_CASE("velocity along the field axis feels no force") {
  ChartGeometry g = open_space(1.0);
  GeodesicPath p = integrate(g, {Vec::Zero(3), v3(0, 0, 1)}, 0.0, 2.0, free_flight());
  CHECK((p.states.back().z - v3(0, 0, 2)).norm() < 1e-10);
}

TEST_CASE("fixed steps: position error converges at fourth order") {
  ChartGeometry g = open_space(1.0);
  auto err = [&](double h) {
    StepControl c = free_flight();
    c.fixed = true;
    c.h_init = h;
    GeodesicPath p = integrate(g, {Vec::Zero(3), v3(1, 0, 0)}, 0.0, std::numbers::pi, c);
    return (p.states.back().z - v3(0, 2, 0)).norm();
  };
  CHECK(std::log2(err(std::numbers::pi / 32) / err(std::numbers::pi / 64)) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("fixed steps: drift is positive and at least fourth order") {
  ChartGeometry g = open_space(1.0);
  auto drift = [&](double h) {
    StepControl c = free_flight();
    c.fixed = true;
    c.h_init = h;
    return speed_drift(integrate(g, {Vec::Zero(3), v3(1, 0, 0)}, 0.0, 2.0, c));
  };
  const double d1 = drift(0.1), d2 = drift(0.05);
  CHECK(d1 > 0.0);
  // the speed error on the circle superconverges (order 5); O(h^4) is the bound
  const double order = std::log2(d1 / d2);
  CHECK(order > 3.8);
}

TEST_CASE("backward integration retraces the orbit") {
  ChartGeometry g = open_space(0.7);
  GeodesicPath f = integrate(g, {v3(0.1, 0.2, 0.3), v3(0.6, 0, 0.8)}, 0.0, 1.5, free_flight());
  GeodesicPath b = integrate(g, f.states.back(), 1.5, 0.0, free_flight());
  CHECK((b.states.back().z - v3(0.1, 0.2, 0.3)).norm() < 1e-9);
}

TEST_CASE("exit times are located on the boundary") {
  ChartGeometry g = ball(1.0, 0.25);
  StepControl c;
  GeodesicPath p = integrate_chord(g, {v3(0.1, -0.2, 0.0), v3(0.0, 0.6, 0.8)}, 10.0, c);
  REQUIRE(p.exit_entry.has_value());
  REQUIRE(p.exit_exit.has_value());
  CHECK(std::abs(g.boundary_fn(p.states.front().z)) < 1e-8);
  CHECK(std::abs(g.boundary_fn(p.states.back().z)) < 1e-8);
}

TEST_CASE("magnetic convexity of the ball: closed form and flow agree") {
  ChartGeometry g = ball(1.0, 0.5);
  CHECK(min_convexity(g, 60) == doctest::Approx(0.5).epsilon(1e-3));
  ChartGeometry strong = ball(1.0, 2.0);
  Vec z;
  CHECK(min_convexity(strong, 60, &z) == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(std::abs(z[2]) < 0.2);  // near the equator of the field axis
  for (const Vec& d : sphere_directions(3, 10, 4)) {
    Vec p = project_to_boundary(g, d);
    BoundaryFrame fr = boundary_frame(g, p);
    Vec v = (fr.tangent[0] + 0.5 * fr.tangent[1]).normalized();
    CHECK(magnetic_convexity(g, fr, v) == doctest::Approx(magnetic_convexity_flow(g, fr, v)).epsilon(1e-6));
  }
}

TEST_CASE("local chart and alpha") {
  ChartGeometry g = ball(1.0, 0.0);
  LocalChart ch = LocalChart::at(g, v3(0, 0, 1), 0.1, 0.1);
  CHECK(ch.x_of(v3(0, 0, 1)) == doctest::Approx(0.1));
  Vec y(2);
  y << 0.05, -0.02;
  auto z = ch.point(0.05, y);
  REQUIRE(z.has_value());
  CHECK(ch.x_of(*z) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK((ch.y_of(*z) - y).norm() < 1e-10);
  for (const Vec& w : sphere_directions(2, 12)) {
    LocalChartParam prm{0.05, Vec::Zero(2), 0.0, w, 0.1, 0.1};
    CHECK(alpha(g, ch, prm) > 0.0);
  }
}

TEST_CASE("odd part of alpha: zero without field, nonzero with one") {
  Vec y0 = Vec::Zero(2);
  ChartGeometry flat = ball(1.0, 0.0);
  ChartGeometry mag = ball(1.0, 0.5);
  AlphaModel a0 = fit_alpha(flat, LocalChart::at(flat, v3(0, 0, 1), 0.1, 0.1), 0.05, y0);
  LocalChart cm = LocalChart::at(mag, v3(1, 0, 0), 0.1, 0.1);
  AlphaModel a1 = fit_alpha(mag, cm, 0.05, y0);
  CHECK(a0.minus.norm() < 1e-6);
  CHECK(a1.minus.norm() > 1e-3);
  for (const Vec& w : sphere_directions(2, 8)) {
    LocalChartParam p{0.05, y0, 0.0, w, 0.1, 0.1};
    LocalChartParam q{0.05, y0, 0.0, Vec(-w), 0.1, 0.1};
    const double odd_p = 0.5 * (alpha(mag, cm, p) - alpha(mag, cm, q));
    const double odd_q = 0.5 * (alpha(mag, cm, q) - alpha(mag, cm, p));
    CHECK(odd_p == doctest::Approx(-odd_q).epsilon(1e-8));
    CHECK(odd_p == doctest::Approx(a1.minus.dot(w)).epsilon(0.05));
  }
}

TEST_CASE("O-local family stays in the chart region") {
  for (double B : {0.0, 0.25}) {
    ChartGeometry g = ball(1.0, B);
    FamilySpec spec;
    spec.c = 0.2;
    spec.n_y = 3;
    spec.n_omega = 4;
    Family fam = olocal_family(g, v3(0, 0, 1), spec);
    REQUIRE(!fam.entries.empty());
    for (const FamilyEntry& e : fam.entries) {
      CHECK(e.min_x >= -1e-9);
      CHECK(std::abs(g.boundary_fn(e.path.states.front().z)) <= 1e-8);
      CHECK(std::abs(g.boundary_fn(e.path.states.back().z)) <= 1e-8);
    }
  }
}

TEST_CASE("foliation of the ball by spheres") {
  ChartGeometry g = ball(1.0, 0.0);
  ScalarFn tau = [](const Vec& z) { return z.squaredNorm(); };
  FoliationReport ok = foliation_check(g, tau, {0.9, 0.5, 0.2}, Vec::Zero(3), 24, 4);
  CHECK(ok.pass);

  // Herglotz-type condition d/dr (r / c) > 0 violated around r = 0.6
  ChartGeometry sound = euclidean_geometry(3);
  set_metric_radial_speed(sound, Expr::parse("1 + 0.8*tanh((r - 0.6)/0.03)"));
  set_boundary_ball(sound, 1.0);
  FoliationReport bad = foliation_check(sound, tau, {0.81, 0.36, 0.09}, Vec::Zero(3), 24, 4);
  CHECK(!bad.pass);
  CHECK(bad.levels[0].pass);
  CHECK(!bad.levels[1].pass);
  CHECK(bad.levels[2].pass);

  ChartGeometry strong = ball(1.0, 2.0);
  FoliationReport flip = foliation_check(strong, tau, {0.64, 0.16}, Vec::Zero(3), 24, 4);
  CHECK(!flip.levels[0].pass);
  CHECK(flip.levels[1].pass);
  CHECK(flip.levels[0].min_value < 0.0);
  CHECK(flip.levels[0].argmin_z.size() == 3);
  CHECK(flip.levels[0].argmin_v.size() == 3);
}

TEST_CASE("trapping detection") {
  ChartGeometry g = ball(1.0, 4.0);
  std::vector<PhasePoint> seeds{{Vec::Zero(3), v3(1, 0, 0)}, {Vec::Zero(3), v3(0, 0, 1)}};
  TrappingReport rep = trapping_check(g, g.boundary_fn, 20.0, seeds);
  REQUIRE(rep.trapped.size() == 1);
  CHECK(rep.trapped[0].v[0] == 1.0);

  ChartGeometry torus = euclidean_geometry(3);
  torus.periodic = true;
  TrappingReport per = trapping_check(torus, torus.boundary_fn, 10.0, {{Vec::Zero(3), v3(0.6, 0.8, 0)}});
  CHECK(per.trapped.size() == 1);

  ChartGeometry weak = ball(1.0, 0.25);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<PhasePoint> rs;
  for (int k = 0; k < 20; ++k) {
    Vec v = v3(nd(rng), nd(rng), nd(rng));
    rs.push_back({0.3 * v3(nd(rng), nd(rng), nd(rng)).cwiseMin(1.0).cwiseMax(-1.0), v.normalized()});
  }
  CHECK(trapping_check(weak, weak.boundary_fn, 20.0, rs).trapped.empty());
}
