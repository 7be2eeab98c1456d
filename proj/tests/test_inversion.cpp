#include <doctest.h>

#include "magtomo/inversion.hpp"

#include <Eigen/Cholesky>
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
  g.bbox_lo = Vec::Constant(3, -1.5);
  g.bbox_hi = Vec::Constant(3, 1.5);
  return g;
}

// A small local problem: family at the north pole, grid over the ray box, nodes touched by rays.
struct Setup {
  ChartGeometry g;
  Family fam;
  std::vector<Ray> rays;
  LayerSpace space;

  Setup(Kind kind, double B, double F, int n_grid) : g(ball(B)) {
    FamilySpec spec;
    spec.c = 0.1;
    spec.n_x = 6;
    spec.n_y = 6;
    spec.n_lambda = 5;
    spec.s_max = 2.0;
    spec.n_omega = 5;
    spec.ctl.h_max = 5e-3;
    fam = olocal_family(g, v3(0, 0, 1), spec);
    rays = rays_from_family(fam);
    Vec lo, hi;
    ray_bbox(rays, 3, lo, hi);
    Grid grid = Grid::uniform(lo, hi, n_grid);
    auto w = ConjugationWeight::from_chart(fam.chart, F, 0.1 * spec.c);
    auto hit = touched_nodes(grid, rays);
    space = make_layer_space(kind, g, grid, w, [&](std::size_t k) { return hit[k] != 0; });
  }

  Vec random_field(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vec c(static_cast<Eigen::Index>(space.field_dofs()));
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = nd(rng);
    return c;
  }

  // smooth bump in the chart, conjugated coefficients
  Vec bump() const {
    const double c = fam.spec.c, x0 = 0.1 * c;
    auto b = [&](const Vec& z) {
      const double x = fam.chart.x_of(z);
      const double r2 = fam.chart.y_of(z).squaredNorm() / 0.16;
      if (r2 >= 1.0 || x <= x0 || x >= c) return 0.0;
      const double s = std::sin(3.141592653589793 * (x - x0) / (c - x0));
      return std::pow(1.0 - r2, 3) * s * s;
    };
    const int q1 = space.kind == Kind::BF ? 3 : 6, q2 = space.kind == Kind::BF ? 1 : 3;
    return space.sample(
        [&](const Vec& z) {
          Vec a(q1);
          for (int i = 0; i < q1; ++i) a[i] = std::sin(1.0 + i + 3.0 * z[i % 3]);
          return Vec(b(z) * a);
        },
        [&](const Vec& z) {
          Vec a(q2);
          for (int i = 0; i < q2; ++i) a[i] = std::cos(2.0 * i + 2.0 * z[(i + 1) % 3]);
          return Vec(b(z) * a);
        });
  }

  Vec data(const Vec& c) const {
    Integrand f = space.integrand(c);
    Vec d(static_cast<Eigen::Index>(rays.size()));
    for (std::size_t r = 0; r < rays.size(); ++r) d[static_cast<Eigen::Index>(r)] = ray_transform(f, *rays[r].path);
    return d;
  }
};

}  // namespace

TEST_CASE("conjugate gradient matches a direct solve") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Mat R(40, 40);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = nd(rng);
  Mat A = R.transpose() * R + 0.5 * Mat::Identity(40, 40);
  Vec b = R.col(0);
  CgResult r = conjugate_gradient([&](const Vec& v) -> Vec { return A * v; }, b, jacobi(A.diagonal()), 1e-12, 400);
  CHECK(r.converged);
  CHECK((r.x - A.llt().solve(b)).norm() < 1e-9 * r.x.norm());
  CgResult capped = conjugate_gradient([&](const Vec& v) -> Vec { return A * v; }, b, jacobi(A.diagonal()), 1e-14, 2);
  CHECK(!capped.converged);
  CHECK(capped.iterations == 2);
}

TEST_CASE("conjugation weight guards against overflow") {
  ChartGeometry g = ball(0.0);
  LocalChart ch = LocalChart::at(g, v3(0, 0, 1), 0.1, 0.1);
  CHECK_NOTHROW(ConjugationWeight::from_chart(ch, 1.0, 0.01).check());
  CHECK_THROWS_AS(ConjugationWeight::from_chart(ch, 10.0, 0.01).check(), Error);
}

TEST_CASE("Witten Laplacian: manufactured solution") {
  for (Kind kind : {Kind::BF, Kind::HB}) {
    Setup s(kind, 0.25, 1.0, 10);
    GaugeProjector proj(s.space);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    Vec p(static_cast<Eigen::Index>(s.space.pot_dofs()));
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = nd(rng);
    Vec rhs = proj.delta(proj.d(p));
    Vec got = proj.witten_solve(rhs);
    CHECK((got - p).norm() <= 1e-8 * p.norm());
    CHECK(proj.min_ritz > 0.0);
  }
}

TEST_CASE("property: solenoidal split reconstructs the field and is gauge-free") {
  for (Kind kind : {Kind::BF, Kind::HB}) {
    Setup s(kind, 0.25, 1.0, 10);
    GaugeProjector proj(s.space);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Vec c = s.random_field(seed);
      Split sp = solenoidal_split(proj, c);
      CHECK(s.space.norm(c - sp.solenoidal - sp.potential_part) <= 1e-12 * s.space.norm(c));
      Vec ds = proj.delta(sp.solenoidal);
      CHECK(std::sqrt(ds.dot(s.space.Mpot * ds)) <= 1e-8 * s.space.norm(c));
      // idempotent
      Split again = solenoidal_split(proj, sp.solenoidal);
      CHECK(s.space.norm(again.potential_part) <= 1e-8 * s.space.norm(c));
    }
  }
}

TEST_CASE("local inversion recovers a smooth field and ignores gauge data") {
  Setup s(Kind::BF, 0.0, 1.0, 12);
  GaugeProjector proj(s.space);
  Vec truth = s.bump();
  Vec d = s.data(truth);
  Cutoff chi{0.5};
  InversionResult r = invert_local(s.space, proj, s.rays, d, chi, {}, &truth);
  REQUIRE(r.relative_error.has_value());
  CHECK(*r.relative_error < 0.05);
  CHECK(!r.ill_posed);
  CHECK(r.gauge_residual < 1e-8);
  CHECK(r.stability_ratio.has_value());

  // a boundary-vanishing gauge pair adds (numerically) zero data
  Field q(1, [](const Vec& z) {
    Vec o(1);
    o[0] = (1.0 - z.squaredNorm()) * std::cos(4.0 * z[0] + z[1]);
    return o;
  });
  TensorPair gp = gauge_bf(q, 3);
  Vec dg(d.size());
  for (std::size_t i = 0; i < s.rays.size(); ++i) dg[static_cast<Eigen::Index>(i)] = ray_transform(gp, *s.rays[i].path);
  CHECK(dg.cwiseAbs().maxCoeff() < 1e-6);
  InversionResult r2 = invert_local(s.space, proj, s.rays, Vec(d + dg), chi, {}, &truth);
  CHECK(s.space.norm(r2.solenoidal - r.solenoidal) <= 1e-4 * s.space.norm(r.solenoidal));
}

TEST_CASE("property: the solenoidal representative ignores discrete potential parts") {
  Setup s(Kind::HB, 0.25, 1.0, 8);
  GaugeProjector proj(s.space);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  Vec c = s.random_field(3);
  Vec p(static_cast<Eigen::Index>(s.space.pot_dofs()));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = nd(rng);
  Vec a = solenoidal_split(proj, c).solenoidal;
  Vec b = solenoidal_split(proj, Vec(c + proj.d(p))).solenoidal;
  CHECK(s.space.norm(a - b) <= 1e-8 * s.space.norm(c));
}

TEST_CASE("inconsistent data leave a misfit; stalled CG is flagged ill-posed") {
  Setup s(Kind::BF, 0.0, 1.0, 8);
  GaugeProjector proj(s.space);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  Vec d(static_cast<Eigen::Index>(s.rays.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = nd(rng);
  InversionResult r = invert_local(s.space, proj, s.rays, d, Cutoff{0.5});
  CHECK(r.residual > 1e-3);
  CHECK(!r.ill_posed);
  InversionParams starved;
  starved.dense_limit = 0;
  starved.max_iter = 2;
  InversionResult r2 = invert_local(s.space, proj, s.rays, d, Cutoff{0.5}, starved);
  CHECK(r2.ill_posed);
}

TEST_CASE("normal operator: unweighted averages of a nonnegative function stay positive") {
  ChartGeometry g = ball(0.0);
  FamilySpec spec;
  spec.c = 0.1;
  spec.n_x = 4;
  spec.n_y = 3;
  spec.n_lambda = 5;
  spec.s_max = 2.0;
  spec.n_omega = 5;
  Family fam = olocal_family(g, v3(0, 0, 1), spec);
  auto rays = rays_from_family(fam);
  Vec lo, hi;
  ray_bbox(rays, 3, lo, hi);
  Grid grid = Grid::uniform(lo, hi, 8);
  auto w = ConjugationWeight::from_chart(fam.chart, 0.0, 0.01);
  auto hit = touched_nodes(grid, rays);
  LayerSpace space = make_layer_space(Kind::BF, g, grid, w, [&](std::size_t k) { return hit[k] != 0; });
  NormalOperator op = assemble_normal(space, fam, Cutoff{0.5});
  TensorPair f = TensorPair::zero(Kind::BF, 3);
  const Vec centre = *fam.chart.point(0.05, Vec::Zero(2));
  f.second = Field(1, [centre](const Vec& z) {
    Vec o(1);
    o[0] = std::exp(-(z - centre).squaredNorm() / 0.002);
    return o;
  });
  Vec out = op.apply_continuous(f, 0.0);
  // output nearest the bump centre
  std::size_t best = 0;
  double dist = 1e300;
  for (std::size_t i = 0; i < op.base_xy.size(); ++i) {
    Vec xy = op.base_xy[i];
    const double d = std::abs(xy[0] - 0.05) + xy.tail(2).norm();
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  CHECK(out[static_cast<Eigen::Index>(best * op.out_comps + op.out_comps - 1)] > 0.0);
}
