#include "magtomo/flow.hpp"

#include "magtomo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace magtomo {

Vec magnetic_rhs(const ChartGeometry& g, const Vec& y) {
  const int n = g.dim;
  Vec z = y.head(n);
  Vec v = y.tail(n);
  Vec out(2 * n);
  out.head(n) = v;
  Vec acc = lorentz_matrix(g, z) * v;
  if (!g.flat_metric) acc -= christoffel(g, z).contract(v, v);
  out.tail(n) = acc;
  return out;
}

namespace {

Vec rk4(const ChartGeometry& g, const Vec& y, double h, const Vec& k1) {
  Vec k2 = magnetic_rhs(g, y + 0.5 * h * k1);
  Vec k3 = magnetic_rhs(g, y + 0.5 * h * k2);
  Vec k4 = magnetic_rhs(g, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Two half steps: the accepted solution of the step-doubling controller.
Vec advance(const ChartGeometry& g, const Vec& y, double h, const Vec& k1, bool fixed) {
  if (fixed) return rk4(g, y, h, k1);
  Vec mid = rk4(g, y, 0.5 * h, k1);
  return rk4(g, mid, 0.5 * h, magnetic_rhs(g, mid));
}

void push_sample(const ChartGeometry& g, GeodesicPath& p, double t, const Vec& y, const Vec& f) {
  const int n = g.dim;
  p.times.push_back(t);
  p.states.push_back({y.head(n), y.tail(n)});
  p.accel.push_back(f.tail(n));
  p.speed.push_back(gnorm(g, y.head(n), y.tail(n)));
}

Vec pack(const PhasePoint& s) {
  Vec y(s.z.size() * 2);
  y << s.z, s.v;
  return y;
}

}  // namespace

PhasePoint GeodesicPath::state_at(double t) const {
  if (times.size() == 1 || t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  const double h = times[k + 1] - times[k];
  const double s = (t - times[k]) / h;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  const double H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
  const double H1 = s - 6 * s3 + 8 * s4 - 3 * s5;
  const double H2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
  const double H3 = 0.5 * s3 - s4 + 0.5 * s5;
  const double H4 = -4 * s3 + 7 * s4 - 3 * s5;
  const double H5 = 10 * s3 - 15 * s4 + 6 * s5;
  const double D0 = -30 * s2 + 60 * s3 - 30 * s4;
  const double D1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
  const double D2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
  const double D3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
  const double D4 = -12 * s2 + 28 * s3 - 15 * s4;
  const double D5 = 30 * s2 - 60 * s3 + 30 * s4;
  const PhasePoint& a = states[k];
  const PhasePoint& b = states[k + 1];
  PhasePoint out;
  out.z = H0 * a.z + H1 * h * a.v + H2 * h * h * accel[k] + H3 * h * h * accel[k + 1] + H4 * h * b.v + H5 * b.z;
  out.v = (D0 * a.z + D1 * h * a.v + D2 * h * h * accel[k] + D3 * h * h * accel[k + 1] + D4 * h * b.v + D5 * b.z) / h;
  return out;
}

GeodesicPath integrate(const ChartGeometry& g, const PhasePoint& start, double t0, double t1,
                       const StepControl& ctl, const ScalarFn& stop_fn) {
  if (!g.in_bbox(start.z)) {
    std::ostringstream os;
    os << "start point " << start.z.transpose() << " outside bbox";
    throw Error(ErrorCode::LeftChart, os.str());
  }
  const ScalarFn& stopf = stop_fn ? stop_fn : g.boundary_fn;
  GeodesicPath path;
  Vec y = pack(start);
  Vec f = magnetic_rhs(g, y);
  double t = t0;
  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  double h = dir * std::min(ctl.h_init, ctl.h_max);
  push_sample(g, path, t, y, f);

  double s_prev = ctl.stop_at_boundary ? stopf(start.z) : 1.0;
  bool armed = s_prev > 0.0;
  std::size_t steps = 0;

  while ((t1 - t) * dir > 1e-15 * std::max(1.0, std::abs(t1))) {
    if (++steps > ctl.max_steps) break;
    double hh = ctl.fixed ? dir * ctl.h_init : h;
    if ((t + hh - t1) * dir > 0.0) hh = t1 - t;
    Vec y_new;
    if (ctl.fixed) {
      y_new = rk4(g, y, hh, f);
    } else {
      Vec y_full = rk4(g, y, hh, f);
      Vec y_half = advance(g, y, hh, f, false);
      double err = (y_half - y_full).cwiseAbs().maxCoeff() / 15.0;
      if (!(err <= ctl.tol)) {
        h = 0.5 * hh;
        if (std::abs(h) < ctl.h_min) {
          std::ostringstream os;
          os << "step " << std::abs(h) << " below " << ctl.h_min << " at t = " << t;
          throw Error(ErrorCode::StepUnderflow, os.str());
        }
        continue;
      }
      // local extrapolation: the doubled-step difference removes the leading h^5 term
      y_new = y_half + (y_half - y_full) / 15.0;
      double grow = err > 0.0 ? 0.9 * std::pow(ctl.tol / err, 0.2) : 2.0;
      grow = std::clamp(grow, 0.2, 2.0);
      double hn = std::abs(hh) * grow;
      h = dir * std::min(hn, ctl.h_max);
    }
    const int n = g.dim;
    Vec z_new = y_new.head(n);
    double s_new = ctl.stop_at_boundary ? stopf(z_new) : 1.0;
    bool outside_box = !g.periodic && !g.in_bbox(z_new);
    if (ctl.stop_at_boundary && !armed && s_new <= 0.0 && path.size() == 1 && std::abs(s_prev) < 1e-9) {
      // started on the boundary heading outward
      path.exit_exit = t;
      return path;
    }
    if (ctl.stop_at_boundary && armed && s_new < 0.0) {
      // bracketed crossing in (0, hh): bisection in time on the stop function
      double lo = 0.0, hi = hh;
      Vec y_hit = y_new;
      while (std::abs(hi - lo) > ctl.bisect_tol) {
        double mid = 0.5 * (lo + hi);
        Vec ym = advance(g, y, mid, f, ctl.fixed);
        if (stopf(ym.head(n)) > 0.0) lo = mid;
        else hi = mid;
      }
      double tau = 0.5 * (lo + hi);
      y_hit = advance(g, y, tau, f, ctl.fixed);
      push_sample(g, path, t + tau, y_hit, magnetic_rhs(g, y_hit));
      path.exit_exit = t + tau;
      return path;
    }
    if (outside_box) {
      std::ostringstream os;
      os << "trajectory left bbox at t = " << t + hh << ", z = " << z_new.transpose();
      throw Error(ErrorCode::LeftChart, os.str());
    }
    if (g.periodic) {
      Vec zw = g.wrap(z_new);
      y_new.head(n) = zw;
    }
    if (!armed && s_new > 0.0) armed = true;
    if (ctl.stop_at_boundary && armed && s_new > 0.0 && s_new < 1e-9) path.grazing_warning = true;
    t += hh;
    y = y_new;
    f = magnetic_rhs(g, y);
    push_sample(g, path, t, y, f);
    s_prev = s_new;
  }
  if (ctl.stop_at_boundary) path.trapped_flag = true;
  return path;
}

GeodesicPath integrate_chord(const ChartGeometry& g, const PhasePoint& start, double t_max,
                             const StepControl& ctl, const ScalarFn& stop_fn) {
  GeodesicPath back = integrate(g, start, 0.0, -t_max, ctl, stop_fn);
  GeodesicPath fwd = integrate(g, start, 0.0, t_max, ctl, stop_fn);
  GeodesicPath out;
  const std::size_t nb = back.size();
  out.times.reserve(nb + fwd.size());
  for (std::size_t i = nb; i-- > 1;) {
    out.times.push_back(back.times[i]);
    out.states.push_back(back.states[i]);
    out.accel.push_back(back.accel[i]);
    out.speed.push_back(back.speed[i]);
  }
  out.times.insert(out.times.end(), fwd.times.begin(), fwd.times.end());
  out.states.insert(out.states.end(), fwd.states.begin(), fwd.states.end());
  out.accel.insert(out.accel.end(), fwd.accel.begin(), fwd.accel.end());
  out.speed.insert(out.speed.end(), fwd.speed.begin(), fwd.speed.end());
  out.exit_entry = back.exit_exit;
  out.exit_exit = fwd.exit_exit;
  out.trapped_flag = back.trapped_flag || fwd.trapped_flag;
  out.grazing_warning = back.grazing_warning || fwd.grazing_warning;
  return out;
}

double speed_drift(const GeodesicPath& path) {
  double worst = 0.0;
  for (double s : path.speed) worst = std::max(worst, std::abs(s - path.speed.front()));
  return worst;
}

double magnetic_convexity(const ChartGeometry& g, const BoundaryFrame& frame, const Vec& v) {
  double lam = second_fundamental_form(g, frame, v);
  return lam - inner(g, frame.z, lorentz(g, frame.z, v), frame.normal);
}

double flow_second_derivative(const ChartGeometry& g, const ScalarFn& q, const PhasePoint& start, double h) {
  StepControl ctl;
  ctl.tol = 1e-14;
  ctl.h_init = h / 8.0;
  ctl.h_max = h / 8.0;
  ctl.stop_at_boundary = false;
  GeodesicPath fwd = integrate(g, start, 0.0, h, ctl);
  GeodesicPath bwd = integrate(g, start, 0.0, -h, ctl);
  const double q0 = q(start.z);
  auto D = [&](double s) {
    double qp = q(fwd.state_at(s).z);
    double qm = q(bwd.state_at(-s).z);
    return (qp - 2.0 * q0 + qm) / (s * s);
  };
  // bwd.times decrease; state_at expects ascending order
  GeodesicPath rb;
  for (std::size_t i = bwd.size(); i-- > 0;) {
    rb.times.push_back(bwd.times[i]);
    rb.states.push_back(bwd.states[i]);
    rb.accel.push_back(bwd.accel[i]);
  }
  bwd = std::move(rb);
  double d1 = D(h), d2 = D(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

double magnetic_convexity_flow(const ChartGeometry& g, const BoundaryFrame& frame, const Vec& v) {
  Vec dr = boundary_gradient(g, frame.z);
  double len = std::sqrt(dr.dot(metric_inverse(g, frame.z) * dr));
  return -flow_second_derivative(g, g.boundary_fn, {frame.z, v}) / len;
}

double level_convexity(const ChartGeometry& g, const ScalarFn& fun, const Vec& z, const Vec& v,
                       BoundaryFrame* frame_out) {
  Vec d = fd_gradient(fun, z);
  if (d.norm() < 1e-8) {
    std::ostringstream os;
    os << "|grad| = " << d.norm() << " < 1e-8 at z = " << z.transpose();
    throw Error(ErrorCode::DegenerateLevel, os.str());
  }
  BoundaryFrame fr = level_frame(g, z, d);
  Mat H = fd_hessian(fun, z);
  double acc = v.dot(H * v);
  if (!g.flat_metric) acc -= d.dot(christoffel(g, z).contract(v, v));
  double len = std::sqrt(d.dot(metric_inverse(g, z) * d));
  double lam = -acc / len;
  if (frame_out) *frame_out = fr;
  return lam - inner(g, z, lorentz(g, z, v), fr.normal);
}

// ---- local chart ----

LocalChart LocalChart::at(const ChartGeometry& g, const Vec& p, double c, double eps) {
  LocalChart ch;
  ch.geo = &g;
  ch.p = p;
  ch.c = c;
  ch.eps = eps;
  BoundaryFrame fr = boundary_frame(g, p);
  ch.nu = fr.normal;
  ch.e = fr.tangent;
  const int n = g.dim;
  Mat B(n, n);
  for (int k = 0; k < n - 1; ++k) B.col(k) = ch.e[k];
  B.col(n - 1) = ch.nu;
  ch.basis_inv = B.inverse();
  return ch;
}

double LocalChart::x_of(const Vec& z) const { return -geo->boundary_fn(z) - eps * (z - p).squaredNorm() + c; }

Vec LocalChart::grad_x(const Vec& z) const { return -boundary_gradient(*geo, z) - 2.0 * eps * (z - p); }

Vec LocalChart::y_of(const Vec& z) const { return (basis_inv * (z - p)).head(dim() - 1); }

std::optional<Vec> LocalChart::point(double x, const Vec& y) const {
  Vec z0 = p;
  for (int k = 0; k < dim() - 1; ++k) z0 += y[k] * e[k];
  double s = 0.0;
  for (int it = 0; it < 60; ++it) {
    Vec z = z0 + s * nu;
    double f = x_of(z) - x;
    if (std::abs(f) < 1e-14) return z;
    double df = grad_x(z).dot(nu);
    if (std::abs(df) < 1e-12) return std::nullopt;
    double step = f / df;
    step = std::clamp(step, -0.5, 0.5);
    s -= step;
    if (std::abs(step) < 1e-15) return z0 + s * nu;
  }
  Vec z = z0 + s * nu;
  if (std::abs(x_of(z) - x) < 1e-10) return z;
  return std::nullopt;
}

Vec LocalChart::tangent(const Vec& z, double lambda, const Vec& omega) const {
  Vec gx = grad_x(z);
  double gn = gx.dot(nu);
  Vec out = (lambda / gn) * nu;
  for (int k = 0; k < dim() - 1; ++k) out += omega[k] * (e[k] - (gx.dot(e[k]) / gn) * nu);
  return out;
}

Mat LocalChart::coframe(const Vec& z) const {
  const int n = dim();
  Mat cf(n, n);
  cf.row(0) = grad_x(z).transpose();
  cf.bottomRows(n - 1) = basis_inv.topRows(n - 1);
  return cf;
}

double alpha(const ChartGeometry& g, const LocalChart& chart, const LocalChartParam& param) {
  auto z = chart.point(param.x, param.y);
  if (!z) throw Error(ErrorCode::LeftChart, "(x, y) does not map into the chart");
  Vec v = chart.tangent(*z, param.lambda, param.omega);
  v /= gnorm(g, *z, v);
  return flow_second_derivative(g, [&chart](const Vec& w) { return chart.x_of(w); }, {*z, v});
}

std::vector<Vec> sphere_directions(int dim_ambient, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  if (dim_ambient == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    if (count > 1) out.push_back(Vec::Constant(1, -1.0));
    return out;
  }
  if (dim_ambient == 2) {
    for (int k = 0; k < count; ++k) {
      double a = 2.0 * std::numbers::pi * k / count;
      Vec w(2);
      w << std::cos(a), std::sin(a);
      out.push_back(w);
    }
    return out;
  }
  if (dim_ambient == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      double zc = 1.0 - 2.0 * (k + 0.5) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      Vec w(3);
      w << r * std::cos(golden * k), r * std::sin(golden * k), zc;
      out.push_back(w);
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int k = 0; k < count; ++k) {
    Vec w(dim_ambient);
    for (int i = 0; i < dim_ambient; ++i) w[i] = nd(rng);
    out.push_back(w.normalized());
  }
  return out;
}

namespace {

Vec hyperspherical_angles(const Vec& w) {
  const int m = static_cast<int>(w.size());
  Vec ang(std::max(0, m - 1));
  for (int k = 0; k < m - 2; ++k) {
    double tail = w.tail(m - k).norm();
    ang[k] = tail > 0 ? std::acos(std::clamp(w[k] / tail, -1.0, 1.0)) : 0.0;
  }
  if (m >= 2) ang[m - 2] = std::atan2(w[m - 1], w[m - 2]);
  return ang;
}

std::vector<double> linspace(int n, double a, double b) {
  std::vector<double> out;
  if (n <= 1) {
    out.push_back(n == 1 ? 0.5 * (a + b) : a);
    return out;
  }
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
  return out;
}

double min_convexity_at(const ChartGeometry& g, const Vec& p, int n_dirs) {
  BoundaryFrame fr = boundary_frame(g, p);
  const int n = g.dim;
  double worst = 1e300;
  for (const Vec& w : sphere_directions(n - 1, n_dirs)) {
    Vec v = Vec::Zero(n);
    for (int k = 0; k < n - 1; ++k) v += w[k] * fr.tangent[k];
    worst = std::min(worst, magnetic_convexity(g, fr, v));
  }
  return worst;
}

}  // namespace

double default_epsilon(const ChartGeometry& g, const Vec& p, double c, double diam_o, int n_omega) {
  double minconv = min_convexity_at(g, p, std::max(8, n_omega));
  if (!(minconv > 0.0)) throw Error(ErrorCode::EmptyFamily, "boundary not strictly magnetic convex at p");
  double eps = 0.1 * minconv / (diam_o * diam_o);
  const int n = g.dim;
  for (int it = 0; it < 40; ++it) {
    LocalChart ch = LocalChart::at(g, p, c, eps);
    bool ok = true;
    for (const Vec& w : sphere_directions(n - 1, n_omega)) {
      LocalChartParam prm{0.5 * c, Vec::Zero(n - 1), 0.0, w, c, eps};
      if (!(alpha(g, ch, prm) > 0.0)) {
        ok = false;
        break;
      }
    }
    if (ok) return eps;
    eps *= 0.5;
  }
  throw Error(ErrorCode::EmptyFamily, "no epsilon with alpha > 0");
}

Family olocal_family(const ChartGeometry& g, const Vec& p_in, const FamilySpec& spec) {
  const int n = g.dim;
  Vec p = project_to_boundary(g, p_in);
  double minconv = min_convexity_at(g, p, 16);
  if (!(minconv > 0.0)) {
    std::ostringstream os;
    os << "boundary not strictly magnetic convex at p (min " << minconv << ")";
    throw Error(ErrorCode::EmptyFamily, os.str());
  }
  Family fam;
  fam.spec = spec;
  fam.chart = LocalChart::at(g, p, spec.c, spec.eps);
  const LocalChart& ch = fam.chart;
  fam.xs = linspace(spec.n_x, spec.x_min_frac * spec.c, spec.x_max_frac * spec.c);
  fam.ss = linspace(spec.n_lambda, -spec.s_max, spec.s_max);
  fam.omegas = sphere_directions(n - 1, spec.n_omega);
  // y grid: n_y points per tangential coordinate, flattened lexicographically
  std::vector<double> y1 = linspace(spec.n_y, -spec.y_max, spec.y_max);
  std::size_t ny_total = 1;
  for (int k = 0; k < n - 1; ++k) ny_total *= y1.size();
  for (std::size_t idx = 0; idx < ny_total; ++idx) {
    Vec y(n - 1);
    std::size_t r = idx;
    for (int k = n - 2; k >= 0; --k) {
      y[k] = y1[r % y1.size()];
      r /= y1.size();
    }
    fam.ys.push_back(y);
  }

  struct Cand {
    FamilyEntry e;
    bool ok = false;
  };
  std::vector<Cand> cands;
  for (std::size_t ix = 0; ix < fam.xs.size(); ++ix)
    for (std::size_t iy = 0; iy < fam.ys.size(); ++iy) {
      auto z = ch.point(fam.xs[ix], fam.ys[iy]);
      if (!z || !g.in_bbox(*z) || !(g.boundary_fn(*z) > 0.0)) continue;
      for (std::size_t il = 0; il < fam.ss.size(); ++il)
        for (std::size_t iw = 0; iw < fam.omegas.size(); ++iw) {
          Cand c;
          c.e.ix = static_cast<int>(ix);
          c.e.iy = static_cast<int>(iy);
          c.e.il = static_cast<int>(il);
          c.e.iw = static_cast<int>(iw);
          c.e.s = fam.ss[il];
          c.e.param = {fam.xs[ix], fam.ys[iy], fam.xs[ix] * fam.ss[il], fam.omegas[iw], spec.c, spec.eps};
          c.e.omega_angles = hyperspherical_angles(fam.omegas[iw]);
          cands.push_back(std::move(c));
        }
    }

  parallel_for(cands.size(), [&](std::size_t i) {
    Cand& c = cands[i];
    const auto& prm = c.e.param;
    Vec z = *ch.point(prm.x, prm.y);
    Vec v = ch.tangent(z, prm.lambda, prm.omega);
    v /= gnorm(g, z, v);
    try {
      c.e.path = integrate_chord(g, {z, v}, spec.t_max, spec.ctl);
    } catch (const Error&) {
      c.ok = false;
      return;
    }
    const GeodesicPath& P = c.e.path;
    double mx = 1e300;
    for (std::size_t k = 0; k < P.size(); ++k) mx = std::min(mx, ch.x_of(P.states[k].z));
    for (std::size_t k = 0; k + 1 < P.size(); ++k)
      mx = std::min(mx, ch.x_of(P.state_at(0.5 * (P.times[k] + P.times[k + 1])).z));
    c.e.min_x = mx;
    c.ok = !P.trapped_flag && P.exit_entry && P.exit_exit && mx >= -1e-9 &&
           std::abs(g.boundary_fn(P.states.front().z)) <= 1e-8 && std::abs(g.boundary_fn(P.states.back().z)) <= 1e-8;
  });

  // shrink C until every admitted sample passes containment
  double C = spec.c_init > 0.0 ? spec.c_init : spec.s_max * std::sqrt(spec.c) * (1.0 + 1e-12);
  const double C0 = C;
  auto admitted = [&](const Cand& c) { return std::abs(c.e.param.lambda) <= C * std::sqrt(c.e.param.x); };
  for (;;) {
    bool all = true;
    bool any = false;
    for (const Cand& c : cands)
      if (admitted(c)) {
        any = true;
        if (!c.ok) all = false;
      }
    if (all || !any || C < 1e-3 * C0) break;
    C *= 0.8;
  }
  fam.C = C;
  for (Cand& c : cands) {
    if (admitted(c) && c.ok) fam.entries.push_back(std::move(c.e));
    else ++fam.rejected;
  }
  if (fam.entries.empty()) throw Error(ErrorCode::EmptyFamily, "no sampled geodesic passes containment");
  return fam;
}

// ---- foliation / trapping ----

FoliationReport foliation_check(const ChartGeometry& g, const ScalarFn& tau, const std::vector<double>& levels,
                                const Vec& center, int n_points, int n_dirs) {
  const int n = g.dim;
  FoliationReport rep;
  rep.pass = true;
  auto rays = sphere_directions(n, n_points, 7);
  for (double t : levels) {
    LevelReport lr;
    lr.t = t;
    lr.min_value = 1e300;
    ScalarFn fun = [&tau, t](const Vec& z) { return t - tau(z); };
    for (const Vec& d : rays) {
      // largest s keeping center + s d inside the bbox
      double smax = 1e300;
      for (int i = 0; i < n; ++i) {
        if (d[i] > 1e-14) smax = std::min(smax, (g.bbox_hi[i] - center[i]) / d[i]);
        if (d[i] < -1e-14) smax = std::min(smax, (g.bbox_lo[i] - center[i]) / d[i]);
      }
      double lo = 0.0, hi = smax;
      if (!(fun(center + lo * d) > 0.0) || !(fun(center + hi * d) < 0.0)) continue;
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        double mid = 0.5 * (lo + hi);
        if (fun(center + mid * d) > 0.0) lo = mid;
        else hi = mid;
      }
      Vec z = center + 0.5 * (lo + hi) * d;
      BoundaryFrame fr;
      level_convexity(g, fun, z, Vec::Zero(n), &fr);
      std::vector<Vec> tdirs;
      if (n == 3) {
        for (int k = 0; k < 2 * n_dirs; ++k) {
          double a = std::numbers::pi * k / n_dirs;
          tdirs.push_back(std::cos(a) * fr.tangent[0] + std::sin(a) * fr.tangent[1]);
        }
      } else {
        for (const Vec& w : sphere_directions(n - 1, 2 * n_dirs, 11)) {
          Vec v = Vec::Zero(n);
          for (int k = 0; k < n - 1; ++k) v += w[k] * fr.tangent[k];
          tdirs.push_back(v);
        }
      }
      for (const Vec& v : tdirs) {
        double val = level_convexity(g, fun, z, v);
        if (val < lr.min_value) {
          lr.min_value = val;
          lr.argmin_z = z;
          lr.argmin_v = v;
        }
      }
    }
    if (lr.min_value == 1e300) throw Error(ErrorCode::DegenerateLevel, "no sample found on level " + std::to_string(t));
    lr.pass = lr.min_value > 0.0;
    rep.pass = rep.pass && lr.pass;
    rep.levels.push_back(lr);
  }
  return rep;
}

TrappingReport trapping_check(const ChartGeometry& g, const ScalarFn& region, double t_max,
                              const std::vector<PhasePoint>& seeds, const StepControl& ctl_in) {
  StepControl ctl = ctl_in;
  ctl.stop_at_boundary = true;
  ScalarFn stop = [&g, &region](const Vec& z) { return std::min(g.boundary_fn(z), region(z)); };
  std::vector<char> trapped(seeds.size(), 0);
  parallel_for(seeds.size(), [&](std::size_t i) {
    GeodesicPath f = integrate(g, seeds[i], 0.0, t_max, ctl, stop);
    GeodesicPath b = integrate(g, seeds[i], 0.0, -t_max, ctl, stop);
    trapped[i] = (f.trapped_flag || b.trapped_flag) ? 1 : 0;
  });
  TrappingReport rep;
  rep.seeds = seeds.size();
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (trapped[i]) rep.trapped.push_back(seeds[i]);
  return rep;
}

}  // namespace magtomo
