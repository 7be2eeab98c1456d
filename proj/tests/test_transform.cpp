#include <doctest.h>

#include "magtomo/inversion.hpp"

#include <cmath>
#include <random>

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
  return g;
}

GeodesicPath chord(const ChartGeometry& g, const Vec& z, const Vec& v) {
  StepControl c;
  c.tol = 1e-11;
  return integrate_chord(g, {z, v}, 10.0, c);
}

Field scalar(std::function<double(const Vec&)> f) {
  return Field(1, [f](const Vec& z) {
    Vec o(1);
    o[0] = f(z);
    return o;
  });
}

// vanishes on the unit sphere
Field bubble_u() {
  return Field(3, [](const Vec& z) {
    const double q = 1.0 - z.squaredNorm();
    return v3(q * std::sin(z[1]), q * z[0], q * (0.5 + z[2]));
  });
}
Field bubble_p() {
  return scalar([](const Vec& z) { return (1.0 - z.squaredNorm()) * std::cos(z[0] + 2.0 * z[1]); });
}

}  // namespace

TEST_CASE("straight chords through the ball") {
  ChartGeometry g = ball(0.0);
  const double d = 0.6;
  GeodesicPath p = chord(g, v3(0, d, 0), v3(1, 0, 0));
  const double len = 2.0 * std::sqrt(1.0 - d * d);
  CHECK(p.length() == doctest::Approx(len).epsilon(1e-9));
  TensorPair one = TensorPair::zero(Kind::BF, 3);
  one.second = Field(1, [](const Vec&) { return Vec(Vec::Ones(1)); });
  CHECK(ray_transform(one, p) == doctest::Approx(len).epsilon(1e-9));
  // constant covector: a . (exit - entry)
  TensorPair a = TensorPair::zero(Kind::BF, 3);
  a.first = Field(3, [](const Vec&) { return v3(2.0, -1.0, 0.5); });
  CHECK(ray_transform(a, p) == doctest::Approx(2.0 * len).epsilon(1e-9));
  Integrand unit = [](const Vec&, const Vec&) { return 1.0; };
  CHECK(ray_transform(unit, p) == doctest::Approx(len).epsilon(1e-9));
}

TEST_CASE("quadrature weights sum to the path length") {
  ChartGeometry g = ball(0.7);
  GeodesicPath p = chord(g, v3(0.1, 0.2, -0.1), v3(0.0, 0.6, 0.8));
  double w = 0.0;
  for (const QuadNode& q : path_quadrature(p)) w += q.w;
  CHECK(w == doctest::Approx(p.length()).epsilon(1e-12));
}

TEST_CASE("exact differentials integrate to endpoint differences") {
  ChartGeometry g = ball(0.5);
  Field p = scalar([](const Vec& z) { return std::sin(z[0]) + z[1] * z[2]; });
  TensorPair dp = gauge_bf(p, 3);
  GeodesicPath path = chord(g, v3(0.2, -0.3, 0.1), v3(0.8, 0.0, 0.6));
  const double diff = p(path.states.back().z)[0] - p(path.states.front().z)[0];
  CHECK(ray_transform(dp, path) == doctest::Approx(diff).epsilon(1e-8));
}

TEST_CASE("property: boundary-vanishing gauge pairs are annihilated") {
  for (double B : {0.0, 0.6}) {
    ChartGeometry g = ball(B);
    TensorPair hb = gauge_hb(g, bubble_u(), bubble_p());
    TensorPair bf = gauge_bf(bubble_p(), 3);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 20; ++k) {
      Vec z = v3(nd(rng), nd(rng), nd(rng));
      z *= 0.7 * std::tanh(z.norm()) / z.norm();
      Vec v = v3(nd(rng), nd(rng), nd(rng)).normalized();
      GeodesicPath path = chord(g, z, v);
      CHECK(std::abs(ray_transform(hb, path)) < 1e-6);
      CHECK(std::abs(ray_transform(bf, path)) < 1e-6);
    }
  }
}

TEST_CASE("transform is linear in the pair") {
  ChartGeometry g = ball(0.3);
  TensorPair a = gauge_hb(g, Field(3, [](const Vec& z) { return v3(z[1] * z[1], 0, z[0]); }), Field::zero(1));
  TensorPair b = TensorPair::zero(Kind::HB, 3);
  b.second = Field(3, [](const Vec& z) { return v3(std::cos(z[2]), 1.0, z[0]); });
  GeodesicPath path = chord(g, v3(0, 0, 0), v3(0.6, 0.8, 0));
  CHECK(ray_transform(a + (-3.0) * b, path) ==
        doctest::Approx(ray_transform(a, path) - 3.0 * ray_transform(b, path)).epsilon(1e-12));
}

TEST_CASE("family transforms through pairs and integrands agree") {
  ChartGeometry g = ball(0.25);
  FamilySpec spec;
  spec.c = 0.2;
  spec.n_y = 3;
  spec.n_omega = 4;
  Family fam = olocal_family(g, v3(0, 0, 1), spec);
  TensorPair f = TensorPair::zero(Kind::BF, 3);
  f.first = Field(3, [](const Vec& z) { return v3(z[0], z[1] * z[2], 1.0); });
  f.second = scalar([](const Vec& z) { return std::exp(z[2]); });
  FamilyData a = transform_family(f, fam), b = transform_family(as_integrand(f), fam);
  REQUIRE(a.values.size() == static_cast<Eigen::Index>(fam.entries.size()));
  CHECK((a.values - b.values).norm() <= 1e-12 * a.values.norm());
  for (char ok : a.valid) CHECK(ok);
}

TEST_CASE("transport of a gauge pair returns minus its potential") {
  ChartGeometry g = ball(0.5);
  TensorPair f = gauge_hb(g, bubble_u(), bubble_p());
  Vec z = v3(0.2, -0.1, 0.3), v = v3(0.0, 0.6, 0.8);
  const double psi = bubble_u()(z).dot(v) + bubble_p()(z)[0];
  CHECK(transport_solution(g, f, z, v) == doctest::Approx(-psi).epsilon(1e-7));
}

TEST_CASE("transport solution: difference quotient along the flow tends to -f at first order") {
  ChartGeometry g = ball(0.5);
  TensorPair f = TensorPair::zero(Kind::BF, 3);
  f.first = Field(3, [](const Vec& z) { return v3(1.0 + z[1], z[0] * z[0], 0.3); });
  f.second = scalar([](const Vec& z) { return 1.0 + z[2]; });
  Vec z = v3(0.1, 0.2, 0.0), v = v3(0.8, 0.0, 0.6);
  const double u0 = transport_solution(g, f, z, v);
  StepControl c;
  c.stop_at_boundary = false;
  auto err = [&](double h) {
    PhasePoint s = integrate(g, {z, v}, 0.0, h, c).states.back();
    return std::abs((transport_solution(g, f, s.z, s.v) - u0) / h + evaluate(f, z, v));
  };
  const double e1 = err(0.02), e2 = err(0.01);
  CHECK(e2 < 0.1);
  CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.15));
}
