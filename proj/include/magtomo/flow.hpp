#pragma once

#include "magtomo/geometry.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace magtomo {

struct PhasePoint {
  Vec z;
  Vec v;
};

struct StepControl {
  double tol = 1e-10;            // local error per accepted step (step-doubling estimate)
  double h_init = 1e-2;
  double h_max = 5e-2;
  double h_min = 1e-12;          // StepUnderflow below this
  bool fixed = false;            // constant step h_init, no error control
  bool stop_at_boundary = true;
  double bisect_tol = 1e-10;     // exit-time resolution
  std::size_t max_steps = 2000000;
};

// Time-sampled magnetic geodesic. Samples span [t_entry, t_exit] when both ends were located.
struct GeodesicPath {
  std::vector<double> times;
  std::vector<PhasePoint> states;
  std::vector<Vec> accel;        // z'' at each sample, for dense output
  std::vector<double> speed;     // |v|_g at each sample
  std::optional<double> exit_entry;
  std::optional<double> exit_exit;
  bool trapped_flag = false;
  bool grazing_warning = false;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  // Quintic Hermite interpolation between samples.
  PhasePoint state_at(double t) const;
  double length() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

// Right-hand side of the first-order system: (z', v') = (v, -Gamma(v,v) + E(v)).
Vec magnetic_rhs(const ChartGeometry& g, const Vec& y);

// Integrates from start over t_span (t1 < t0 integrates backward). With stop_at_boundary,
// stops at the first sign change of rho (or of `stop_fn` when given) and sets exit_exit.
GeodesicPath integrate(const ChartGeometry& g, const PhasePoint& start, double t0, double t1,
                       const StepControl& ctl = {}, const ScalarFn& stop_fn = nullptr);

// Boundary-to-boundary path through an interior point: backward to entry, forward to exit.
GeodesicPath integrate_chord(const ChartGeometry& g, const PhasePoint& start, double t_max,
                             const StepControl& ctl = {}, const ScalarFn& stop_fn = nullptr);

double speed_drift(const GeodesicPath& path);

// Lambda(z,v) - <E_z(v), nu>_g from the defining-function derivatives.
double magnetic_convexity(const ChartGeometry& g, const BoundaryFrame& frame, const Vec& v);
// Same quantity from the flow: -(d^2/dt^2) rho(gamma(t)) / |grad rho|_g by Richardson extrapolation.
double magnetic_convexity_flow(const ChartGeometry& g, const BoundaryFrame& frame, const Vec& v);

// Convexity of the level set {fun = 0} viewed from {fun > 0}; `fun` need not be rho.
double level_convexity(const ChartGeometry& g, const ScalarFn& fun, const Vec& z, const Vec& v,
                       BoundaryFrame* frame_out = nullptr);

// Second time derivative of q(gamma(t)) at t = 0, Richardson-extrapolated central differences.
double flow_second_derivative(const ChartGeometry& g, const ScalarFn& q, const PhasePoint& start,
                              double h = 1e-2);

// ---- local boundary chart (x, y) ----

struct LocalChartParam {
  double x = 0.0;
  Vec y;
  double lambda = 0.0;
  Vec omega;  // unit vector in y-coordinates
  double c = 0.0;
  double eps = 0.0;
};

// x = -rho - eps |z - p|^2 + c; y = tangential coordinates along the frame at p.
// z(x, y) = p + sum_k y_k e_k + s nu with s solving x(z) = x.
struct LocalChart {
  const ChartGeometry* geo = nullptr;
  Vec p;
  Vec nu;
  std::vector<Vec> e;
  double c = 0.1;
  double eps = 0.1;
  Mat basis_inv;  // inverse of [e_1 .. e_{n-1} nu]

  static LocalChart at(const ChartGeometry& g, const Vec& p, double c, double eps);

  int dim() const { return geo->dim; }
  double x_of(const Vec& z) const;
  Vec grad_x(const Vec& z) const;
  Vec y_of(const Vec& z) const;
  std::optional<Vec> point(double x, const Vec& y) const;
  // Chart vector of lambda d_x + omega d_y at z(x,y), before normalisation.
  Vec tangent(const Vec& z, double lambda, const Vec& omega) const;
  // Coordinate covectors dx, dy_k at z (rows).
  Mat coframe(const Vec& z) const;
};

double alpha(const ChartGeometry& g, const LocalChart& chart, const LocalChartParam& param);

// eps = 0.1 * min convexity / diam^2, halved until alpha(x, y, 0, omega) > 0 on samples.
double default_epsilon(const ChartGeometry& g, const Vec& p, double c, double diam_o, int n_omega = 8);

struct FamilySpec {
  double c = 0.1;
  double eps = 0.25;
  int n_x = 4;
  double x_min_frac = 0.1;   // x samples in [x_min_frac * c, x_max_frac * c]
  double x_max_frac = 0.9;
  int n_y = 8;               // per tangential coordinate
  double y_max = 0.5;
  int n_lambda = 3;          // lambda = x s with s uniform in [-s_max, s_max]
  double s_max = 1.0;
  int n_omega = 8;
  double c_init = -1.0;      // initial C in |lambda| <= C sqrt(x); < 0: s_max sqrt(c)
  double t_max = 20.0;
  StepControl ctl{1e-9, 1e-2, 2e-2};
};

struct FamilyEntry {
  int ix = 0, iy = 0, il = 0, iw = 0;
  LocalChartParam param;
  double s = 0.0;          // lambda / x
  Vec omega_angles;        // hyperspherical angles of omega
  GeodesicPath path;
  double min_x = 0.0;
};

struct Family {
  LocalChart chart;
  FamilySpec spec;
  double C = 0.0;
  std::vector<double> xs, ss;
  std::vector<Vec> ys, omegas;
  std::vector<FamilyEntry> entries;
  std::size_t rejected = 0;
};

Family olocal_family(const ChartGeometry& g, const Vec& p, const FamilySpec& spec);

// Uniform points on S^{d} for d = 0, 1 (angles) and Fibonacci / Gaussian samples otherwise.
std::vector<Vec> sphere_directions(int dim_ambient, int count, std::uint64_t seed = 1);

// ---- foliation / trapping ----

struct LevelReport {
  double t = 0.0;
  double min_value = 0.0;
  Vec argmin_z, argmin_v;
  bool pass = false;
};

struct FoliationReport {
  std::vector<LevelReport> levels;
  bool pass = false;
};

// Level sets of tau are sampled along rays from `center` (star-shaped levels).
FoliationReport foliation_check(const ChartGeometry& g, const ScalarFn& tau, const std::vector<double>& levels,
                                const Vec& center, int n_points = 64, int n_dirs = 8);

struct TrappingReport {
  std::vector<PhasePoint> trapped;
  std::size_t seeds = 0;
};

// region: sub-level defining function, positive inside the region of interest.
TrappingReport trapping_check(const ChartGeometry& g, const ScalarFn& region, double t_max,
                              const std::vector<PhasePoint>& seeds, const StepControl& ctl = {});

}  // namespace magtomo
