#include "magtomo/pipeline.hpp"

#include <cmath>
#include <numbers>

namespace magtomo {

Vec base_point(const RunConfig& cfg, const ChartGeometry& g) {
  const int n = g.dim;
  if (!cfg.p.empty()) {
    Vec p = Eigen::Map<const Vec>(cfg.p.data(), n);
    if (std::abs(g.boundary_fn(p)) > 1e-8) throw ValidationError("family.p", "base point is not on the boundary");
    return p;
  }
  Vec z = Vec::Zero(n);
  z[n - 1] = g.bbox_hi[n - 1];
  return project_to_boundary(g, z);
}

Cutoff default_cutoff(const ChartGeometry& g, const Family& family, double F) {
  if (!(F > 0.0)) return Cutoff{1.0};
  const Vec y0 = Vec::Zero(g.dim - 1);
  AlphaModel a = fit_alpha(g, family.chart, 0.5 * family.spec.c, y0);
  const double mean = a.plus.trace() / static_cast<double>(a.plus.rows());
  if (!(mean > 0.0)) throw Error(ErrorCode::IllPosed, "boundary function is not convex at the base point (alpha <= 0)");
  return Cutoff{mean / F};
}

std::unique_ptr<LocalProblem> build_local(const RunConfig& cfg) {
  auto lp = std::make_unique<LocalProblem>();
  lp->geo = build_geometry(cfg.geometry);
  const ChartGeometry& g = lp->geo;
  const int n = g.dim;
  lp->family = olocal_family(g, base_point(cfg, g), cfg.family);
  lp->rays = rays_from_family(lp->family);
  Vec lo, hi;
  if (cfg.grid.lo.empty()) {
    ray_bbox(lp->rays, n, lo, hi);
  } else {
    lo = Eigen::Map<const Vec>(cfg.grid.lo.data(), n);
    hi = Eigen::Map<const Vec>(cfg.grid.hi.data(), n);
  }
  lp->grid = Grid::uniform(lo, hi, cfg.grid.n);
  const double x_min = cfg.family.x_min_frac * cfg.family.c;
  ConjugationWeight w = ConjugationWeight::from_chart(lp->family.chart, cfg.F, x_min);
  w.check();
  const std::vector<char> hit = touched_nodes(lp->grid, lp->rays);
  lp->space = make_layer_space(cfg.kind, g, lp->grid, w, [&](std::size_t k) { return hit[k] != 0; });
  if (lp->space.field_nodes.empty()) throw Error(ErrorCode::EmptyFamily, "no active grid node under the family");
  lp->proj = std::make_unique<GaugeProjector>(lp->space);
  lp->chi = cfg.mu > 0.0 ? Cutoff{cfg.mu} : default_cutoff(g, lp->family, cfg.F);
  return lp;
}

Vec chart_bump(const LocalProblem& lp, double radius) {
  const LocalChart& chart = lp.family.chart;
  const double c = lp.family.spec.c;
  const double x0 = lp.family.spec.x_min_frac * c;
  const int n = lp.geo.dim;
  auto bump = [&](const Vec& z) {
    const double x = chart.x_of(z);
    const double r2 = chart.y_of(z).squaredNorm() / (radius * radius);
    if (r2 >= 1.0 || x <= x0 || x >= c) return 0.0;
    const double s = std::sin(std::numbers::pi * (x - x0) / (c - x0));
    return std::pow(1.0 - r2, 3) * s * s;
  };
  const int q1 = lp.space.kind == Kind::BF ? n : sym_size(n);
  const int q2 = lp.space.kind == Kind::BF ? 1 : n;
  return lp.space.sample(
      [&](const Vec& z) {
        Vec a(q1);
        for (int i = 0; i < q1; ++i) a[i] = std::sin(1.0 + i + 3.0 * z[i % n]);
        return Vec(bump(z) * a);
      },
      [&](const Vec& z) {
        Vec a(q2);
        for (int i = 0; i < q2; ++i) a[i] = std::cos(2.0 * i + 2.0 * z[(i + 1) % n]);
        return Vec(bump(z) * a);
      });
}

TensorPair expression_pair(const FieldSpec& spec, const ChartGeometry& g) {
  const int n = g.dim;
  TensorPair f = TensorPair::zero(spec.kind, n);
  const int q1 = f.first_size(), q2 = f.second_size();
  if (static_cast<int>(spec.first.size()) != q1)
    throw ValidationError("field.first", "expected " + std::to_string(q1) + " expressions");
  if (static_cast<int>(spec.second.size()) != q2)
    throw ValidationError("field.second", "expected " + std::to_string(q2) + " expressions");
  auto compile = [](const std::vector<std::string>& src, const std::string& path) {
    std::vector<Expr> out;
    for (std::size_t i = 0; i < src.size(); ++i) {
      try {
        out.push_back(Expr::parse(src[i]));
      } catch (const std::exception& e) {
        throw ValidationError(path + "[" + std::to_string(i) + "]", e.what());
      }
    }
    return out;
  };
  auto e1 = compile(spec.first, "field.first");
  auto e2 = compile(spec.second, "field.second");
  auto field = [](std::vector<Expr> ex) {
    const int q = static_cast<int>(ex.size());
    return Field(q, [ex](const Vec& z) {
      Vec o(static_cast<Eigen::Index>(ex.size()));
      for (std::size_t i = 0; i < ex.size(); ++i) o[static_cast<Eigen::Index>(i)] = ex[i](z);
      return o;
    });
  };
  f.first = field(e1);
  f.second = field(e2);
  const ScalarFn rho = g.boundary_fn;
  f.support = rho;
  return f;
}

TensorPair grid_pair(Kind kind, const GridField& f) {
  const int n = f.grid.dim;
  TensorPair out = TensorPair::zero(kind, n);
  const int q1 = out.first_size(), q2 = out.second_size();
  if (f.ncomp != q1 + q2) throw ValidationError("field", "component count does not match kind");
  auto shared = std::make_shared<GridField>(f);
  out.first = Field(q1, [shared, q1](const Vec& z) { return Vec((*shared)(z).head(q1)); });
  out.second = Field(q2, [shared, q2](const Vec& z) { return Vec((*shared)(z).tail(q2)); });
  return out;
}

GridField radial_bump(Kind kind, const ChartGeometry& g, const Grid& grid, const Vec& center, double r_in, double r_out) {
  const int n = g.dim;
  const int q1 = kind == Kind::BF ? n : sym_size(n);
  const int q2 = kind == Kind::BF ? 1 : n;
  return GridField::sample(grid, q1 + q2, [&](const Vec& z) {
    Vec o = Vec::Zero(q1 + q2);
    const double r = (z - center).norm();
    if (!(g.boundary_fn(z) > 0.0) || r <= r_in || r >= r_out) return o;
    const double s = std::sin(std::numbers::pi * (r - r_in) / (r_out - r_in));
    for (int i = 0; i < q1; ++i) o[i] = s * s * std::sin(1.0 + i + 1.5 * z[i % n]);
    for (int i = 0; i < q2; ++i) o[q1 + i] = s * s * std::cos(1.0 + i + 1.5 * z[(i + 1) % n]);
    return o;
  });
}

LayerSchedule schedule_from(const ScheduleSpec& spec, int dim) {
  Vec c = spec.center.empty() ? Vec(Vec::Zero(dim)) : Vec(Eigen::Map<const Vec>(spec.center.data(), dim));
  LayerSchedule s = LayerSchedule::radial(c, spec.levels);
  s.overlap = spec.overlap;
  return s;
}

}  // namespace magtomo
