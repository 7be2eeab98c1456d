#include "magtomo/layers.hpp"

#include "magtomo/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace magtomo {

LayerSchedule LayerSchedule::radial(const Vec& center, const std::vector<double>& levels) {
  LayerSchedule s;
  s.center = center;
  s.levels = levels;
  s.tau = [center](const Vec& z) { return (z - center).norm(); };
  s.grad_tau = [center](const Vec& z) -> Vec {
    Vec d = z - center;
    const double r = d.norm();
    return r > 0.0 ? Vec(d / r) : Vec(Vec::Zero(z.size()));
  };
  s.level_point = [center](double t, const Vec& dir) -> Vec { return center + t * dir.normalized(); };
  return s;
}

void LayerSchedule::validate() const {
  if (levels.size() < 2) throw ValidationError("schedule.levels", "at least two levels required");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] < levels[i - 1])) throw ValidationError("schedule.levels", "levels must strictly decrease");
  if (!tau || !grad_tau || !level_point) throw ValidationError("schedule.tau", "foliation function missing");
}

double LayerSchedule::overlap_width(std::size_t k) const {
  // k indexes levels from the outside: layer k spans (levels[k], levels[k-1])
  if (overlap >= 0.0) return overlap;
  return levels[k - 1] - levels[k];
}

double blend_weight(double tau, double t, double width) {
  if (tau <= t) return 1.0;
  if (width <= 0.0 || tau >= t + width) return 0.0;
  const double u = (tau - t) / width;
  return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

LayerSpace plain_space(Kind kind, const ChartGeometry& g, const Grid& grid,
                       const std::function<bool(const Vec&)>& keep) {
  ConjugationWeight w;
  w.F = 0.0;
  w.x_min = 0.5;
  w.x = [](const Vec&) { return 1.0; };
  const int n = grid.dim;
  w.grad_x = [n](const Vec&) -> Vec { return Vec::Zero(n); };
  return make_layer_space(kind, g, grid, w, [&](std::size_t k) { return keep(grid.node(k)); });
}

Vec sample_pair(const LayerSpace& plain, const TensorPair& f) {
  return plain.sample(
      [&](const Vec& z) -> Vec {
        return f.support && f.support(z) < 0.0 ? Vec(Vec::Zero(f.first_size())) : f.first(z);
      },
      [&](const Vec& z) -> Vec {
        return f.support && f.support(z) < 0.0 ? Vec(Vec::Zero(f.second_size())) : f.second(z);
      });
}

Vec restrict_grid(const LayerSpace& plain, const GridField& f) {
  Vec c(static_cast<Eigen::Index>(plain.field_dofs()));
  for (std::size_t i = 0; i < plain.field_nodes.size(); ++i)
    c.segment(static_cast<Eigen::Index>(i) * plain.ncomp, plain.ncomp) = f.at(plain.field_nodes[i]);
  return c;
}

Integrand grid_integrand(Kind kind, const GridField& f) {
  const int n = f.grid.dim;
  const int q = kind == Kind::BF ? n : sym_size(n);
  return [&f, kind, n, q](const Vec& z, const Vec& v) {
    Vec a = f(z);
    if (kind == Kind::BF) return a.head(n).dot(v) + a[n];
    return sym_quadratic(n, a.head(q), v) + a.tail(n).dot(v);
  };
}

namespace {

double solenoidal_distance(const LayerSpace& plain, const Vec& a, const Vec& b, double* ref_norm) {
  GaugeProjector proj(plain);
  Split sa = solenoidal_split(proj, a);
  Split sb = solenoidal_split(proj, b);
  const double nb = plain.norm(sb.solenoidal);
  if (ref_norm) *ref_norm = nb;
  const double e = plain.norm(sa.solenoidal - sb.solenoidal);
  return nb > 0.0 ? e / nb : e;
}

struct LayerRays {
  std::vector<GeodesicPath> paths;
  std::vector<Ray> rays;
  std::size_t rejected = 0;
};

LayerRays layer_rays(const ChartGeometry& g, const LayerSchedule& sch, double t_in, double t_out, double x_min,
                     const LayerStripParams& prm) {
  const int n = g.dim;
  std::vector<double> radii;
  for (int i = 0; i < prm.n_radii; ++i)
    radii.push_back(t_in + x_min + (t_out - t_in - x_min) * (i + 0.5) / prm.n_radii);
  auto dirs = sphere_directions(n, prm.n_points, 3);

  struct Cand {
    Vec z, v;
    double xb = 0.0, s = 0.0;
    GeodesicPath path;
    bool ok = false;
  };
  std::vector<Cand> cands;
  for (double rb : radii) {
    if (rb >= sch.levels.front()) continue;
    const double lam_max = prm.tilt_frac * std::sqrt(std::max(0.0, 1.0 - (t_in / rb) * (t_in / rb)));
    for (std::size_t p = 0; p < dirs.size(); ++p) {
      const Vec z = sch.level_point(rb, dirs[p]);
      if (!(g.boundary_fn(z) > 0.0)) continue;
      Vec nu = sch.grad_tau(z);
      BoundaryFrame fr = level_frame(g, z, nu);
      const Vec& normal = fr.normal;  // towards increasing tau
      for (int d = 0; d < prm.n_dirs; ++d) {
        const double a = 2.0 * std::numbers::pi * (d + 0.37 * (p % 7) / 7.0) / prm.n_dirs;
        Vec w = Vec::Zero(n);
        if (n == 2) w = fr.tangent[0] * (d % 2 ? -1.0 : 1.0);
        else w = std::cos(a) * fr.tangent[0] + std::sin(a) * fr.tangent[1];
        for (int l = 0; l < prm.n_tilt; ++l) {
          const double lam = prm.n_tilt == 1 ? 0.0 : lam_max * (2.0 * l / (prm.n_tilt - 1) - 1.0);
          Cand c;
          c.z = z;
          c.v = std::sqrt(1.0 - lam * lam) * w + lam * normal;
          c.xb = rb - t_in;
          c.s = lam / c.xb;
          cands.push_back(std::move(c));
        }
      }
    }
  }
  parallel_for(cands.size(), [&](std::size_t i) {
    Cand& c = cands[i];
    try {
      c.path = integrate_chord(g, {c.z, c.v}, 50.0, prm.ctl);
    } catch (const Error&) {
      return;
    }
    if (c.path.trapped_flag || !c.path.exit_entry || !c.path.exit_exit) return;
    double mn = 1e300;
    for (const PhasePoint& s : c.path.states) mn = std::min(mn, sch.tau(s.z));
    c.ok = mn >= t_in;
  });
  LayerRays out;
  for (Cand& c : cands) {
    if (!c.ok) {
      ++out.rejected;
      continue;
    }
    out.paths.push_back(std::move(c.path));
    out.rays.push_back({nullptr, c.xb, c.s});
  }
  for (std::size_t i = 0; i < out.rays.size(); ++i) out.rays[i].path = &out.paths[i];
  return out;
}

}  // namespace

LayerStripResult layer_strip(const ChartGeometry& g, const LayerSchedule& sch, const RayOracle& oracle,
                             const LayerStripParams& prm, const TensorPair* truth) {
  sch.validate();
  const int n = g.dim;
  if (prm.check_foliation) {
    std::vector<double> inner(sch.levels.begin() + 1, sch.levels.end());
    FoliationReport fol = foliation_check(g, sch.tau, inner, sch.center, 32, 4);
    for (const LevelReport& lr : fol.levels)
      if (!lr.pass) {
        std::ostringstream os;
        os << "level " << lr.t << " is not strictly magnetic convex (min " << lr.min_value << ")";
        throw Error(ErrorCode::LayerFailure, os.str());
      }
  }
  const Vec lo = prm.lo.size() ? prm.lo : g.bbox_lo;
  const Vec hi = prm.hi.size() ? prm.hi : g.bbox_hi;
  const Grid grid = Grid::uniform(lo, hi, prm.grid_n);
  const int ncomp = prm.kind == Kind::BF ? n + 1 : sym_size(n) + n;

  LayerStripResult res;
  res.field = GridField(grid, ncomp);
  std::vector<Vec> truth_nodes;

  for (std::size_t k = 1; k < sch.levels.size(); ++k) {
    const double t_out = sch.levels[k - 1];
    const double t_in = sch.levels[k];
    const double ov = k == 1 ? 0.0 : sch.overlap_width(k - 1);
    const double x_min = prm.x_min_frac * (t_out - t_in);
    // rays reach below the layer; the update is kept only from t_in up, away from the e^{F/x} blow-up
    const double ray_floor = std::max(t_in - prm.dip * (t_out - t_in), x_min);
    LayerReport rep;
    rep.t_inner = t_in;
    rep.t_outer = t_out;

    LayerRays lr = layer_rays(g, sch, ray_floor, t_out, x_min, prm);
    rep.rays = lr.rays.size();
    rep.rejected_rays = lr.rejected;
    if (lr.rays.empty()) throw Error(ErrorCode::LayerFailure, "no admissible geodesic in layer above " +
                                                                  std::to_string(t_in));
    Vec data(static_cast<Eigen::Index>(lr.rays.size()));
    Integrand current = grid_integrand(prm.kind, res.field);
    parallel_for(lr.rays.size(), [&](std::size_t r) {
      data[static_cast<Eigen::Index>(r)] = oracle(lr.paths[r]) - ray_transform(current, lr.paths[r]);
    });

    // Rays dip into cells straddling the floor, so the layer coordinate starts one cell diagonal below it.
    double diag = 0.0;
    for (int a = 0; a < n; ++a) diag += grid.spacing(a) * grid.spacing(a);
    diag = std::sqrt(diag);
    const double floor = ray_floor - 1.2 * diag;
    for (Ray& r : lr.rays) r.x_base += 1.2 * diag;
    ConjugationWeight w;
    w.F = prm.F;
    w.x_min = 0.1 * diag;
    const ScalarFn tau = sch.tau;
    const VecFn gtau = sch.grad_tau;
    w.x = [tau, floor](const Vec& z) { return tau(z) - floor; };
    w.grad_x = gtau;
    const double top = t_out + ov;
    const std::vector<char> hit = touched_nodes(grid, lr.rays);
    LayerSpace space = make_layer_space(prm.kind, g, grid, w, [&](std::size_t node) {
      return hit[node] && (k == 1 || tau(grid.node(node)) < top);
    });
    rep.dofs = space.field_dofs();
    GaugeProjector proj(space);
    Cutoff chi{prm.mu > 0.0 ? prm.mu : 1.0};
    InversionParams ip = prm.inversion;
    if (prm.mu <= 0.0) ip.chi_row_weights = false;
    rep.inversion = invert_local(space, proj, lr.rays, data, chi, ip);
    if (rep.inversion.ill_posed) {
      std::ostringstream os;
      os << "inversion above level " << t_in << " stagnated (CG residual " << rep.inversion.cg_residual
         << ", data residual " << rep.inversion.residual << ")";
      throw Error(ErrorCode::LayerFailure, os.str());
    }

    // overlap above this layer, before and after the update
    std::function<bool(const Vec&)> in_overlap = [&](const Vec& z) {
      const double t = tau(z);
      return t > t_out && t < t_out + ov;
    };
    std::optional<LayerSpace> ov_space;
    Vec before;
    if (ov > 0.0) {
      ov_space = plain_space(prm.kind, g, grid, in_overlap);
      before = restrict_grid(*ov_space, res.field);
    }

    const Vec& c = rep.inversion.coeffs;
    for (std::size_t f = 0; f < space.field_nodes.size(); ++f) {
      const std::size_t node = space.field_nodes[f];
      const Vec z = grid.node(node);
      const double t = tau(z);
      if (t < t_in) continue;
      const double phi = k == 1 ? 1.0 : blend_weight(t, t_out, ov);
      if (phi == 0.0) continue;
      Vec a, b;
      space.physical(c, z, a, b);
      Vec add(ncomp);
      add << a, b;
      res.field.set(node, res.field.at(node) + phi * add);
    }

    if (ov_space && ov_space->field_dofs() > 0) {
      double ref = 0.0;
      Vec after = restrict_grid(*ov_space, res.field);
      const double change = solenoidal_distance(*ov_space, after, before, &ref);
      rep.overlap_change = change;
    }
    if (truth) {
      LayerSpace core = plain_space(prm.kind, g, grid, [&](const Vec& z) {
        const double t = tau(z);
        return t > t_in && t < t_out;
      });
      if (core.field_dofs() > 0)
        rep.layer_error = solenoidal_distance(core, restrict_grid(core, res.field), sample_pair(core, *truth), nullptr);
    }
    res.layers.push_back(std::move(rep));
  }

  // consistency: the overlap change after layer k against the errors of the two layers sharing it
  for (std::size_t k = 1; k < res.layers.size(); ++k) {
    LayerReport& r = res.layers[k];
    if (!r.overlap_change || !r.layer_error || !res.layers[k - 1].layer_error) continue;
    const double bound = 2.0 * std::max(*r.layer_error, *res.layers[k - 1].layer_error);
    r.overlap_consistent = *r.overlap_change <= bound;
    res.overlaps_consistent = res.overlaps_consistent && r.overlap_consistent;
  }

  if (truth) {
    const double a = sch.levels.back();
    LayerSpace ma = plain_space(prm.kind, g, grid, [&](const Vec& z) { return sch.tau(z) > a; });
    res.global_error = solenoidal_distance(ma, restrict_grid(ma, res.field), sample_pair(ma, *truth), nullptr);
  }
  return res;
}

}  // namespace magtomo
