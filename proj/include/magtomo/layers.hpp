#pragma once

#include "magtomo/inversion.hpp"

namespace magtomo {

// Foliation tau with levels t_K = b > ... > t_0 = a; layer k is {t_{k-1} < tau < t_k}.
struct LayerSchedule {
  ScalarFn tau;
  VecFn grad_tau;
  // Point on {tau = t} in the direction `dir` from the foliation centre.
  std::function<Vec(double t, const Vec& dir)> level_point;
  std::vector<double> levels;  // strictly decreasing
  double overlap = -1.0;       // < 0: one layer thickness
  Vec center;

  static LayerSchedule radial(const Vec& center, const std::vector<double>& levels);
  void validate() const;
  double overlap_width(std::size_t k) const;  // overlap above layer k (k >= 1)
};

// Quintic smoothstep: 1 for tau <= t, 0 for tau >= t + width.
double blend_weight(double tau, double t, double width);

using RayOracle = std::function<double(const GeodesicPath&)>;

// Shell problems are fitted almost exactly; the gauge penalty only selects the representative.
inline InversionParams weak_regularisation() {
  InversionParams p;
  p.reg_factor = 1e-8;
  return p;
}

struct LayerStripParams {
  Kind kind = Kind::BF;
  double F = 0.0;
  double mu = -1.0;          // Gaussian cutoff width; < 0: rows unweighted
  int grid_n = 20;
  Vec lo, hi;                // global grid box; empty: the geometry's bbox
  double x_min_frac = 0.1;   // of the layer thickness
  double dip = 1.0;          // rays reach this many layer thicknesses below the layer
  int n_radii = 6;
  int n_points = 400;        // base points per radius (Fibonacci sphere)
  int n_dirs = 6;
  int n_tilt = 3;
  double tilt_frac = 0.8;    // of the largest tilt whose straight chord stays above the layer floor
  StepControl ctl{1e-10, 1e-2, 5e-3};
  InversionParams inversion = weak_regularisation();
  bool check_foliation = true;
};

struct LayerReport {
  double t_inner = 0.0, t_outer = 0.0;
  std::size_t rays = 0, dofs = 0, rejected_rays = 0;
  InversionResult inversion;
  std::optional<double> layer_error;          // core-layer solenoidal error against the truth
  std::optional<double> overlap_change;       // solenoidal change on the overlap above this layer
  bool overlap_consistent = true;
};

struct LayerStripResult {
  GridField field;  // physical (first, second) per global node
  std::vector<LayerReport> layers;
  std::optional<double> global_error;  // solenoidal error on M_a
  bool overlaps_consistent = true;
};

// Unweighted (F = 0, W = Id) space on the nodes selected by `keep`.
LayerSpace plain_space(Kind kind, const ChartGeometry& g, const Grid& grid, const std::function<bool(const Vec&)>& keep);

// Node values of a physical pair: (first, second) stacked per node.
Vec sample_pair(const LayerSpace& plain, const TensorPair& f);
Vec restrict_grid(const LayerSpace& plain, const GridField& f);
Integrand grid_integrand(Kind kind, const GridField& f);

// Outermost layer first: residual data If - I(current), local inversion on the layer plus overlap,
// blending by the quintic cutoff. `truth` (physical) enables the error diagnostics.
LayerStripResult layer_strip(const ChartGeometry& g, const LayerSchedule& schedule, const RayOracle& oracle,
                             const LayerStripParams& prm, const TensorPair* truth = nullptr);

}  // namespace magtomo
