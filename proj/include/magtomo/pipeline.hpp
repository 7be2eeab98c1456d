#pragma once

#include "magtomo/config.hpp"

#include <memory>

namespace magtomo {

// Everything one local inversion needs; owns the geometry the space points into, so it is not movable.
struct LocalProblem {
  ChartGeometry geo;
  Family family;
  std::vector<Ray> rays;
  Grid grid;
  LayerSpace space;
  std::unique_ptr<GaugeProjector> proj;
  Cutoff chi;

  LocalProblem() = default;
  LocalProblem(const LocalProblem&) = delete;
  LocalProblem& operator=(const LocalProblem&) = delete;
};

// Family at p, grid over the ray box (or the configured box), active nodes touched by the rays.
std::unique_ptr<LocalProblem> build_local(const RunConfig& cfg);

// Boundary point above the origin along the last axis unless `p` is configured.
Vec base_point(const RunConfig& cfg, const ChartGeometry& g);

// mu = mean alpha(x, y=0, 0, omega) / F at mid depth; the Gaussian then balances e^{F s^2 / 2 alpha}.
Cutoff default_cutoff(const ChartGeometry& g, const Family& family, double F);

// Conjugated coefficients of a smooth bump supported in x in (x_min, c), |y| < radius, with
// smooth component modulations.
Vec chart_bump(const LocalProblem& lp, double radius);

// Analytic pair from component expressions (zero outside M).
TensorPair expression_pair(const FieldSpec& spec, const ChartGeometry& g);

// Physical pair read off a grid field by multilinear interpolation.
TensorPair grid_pair(Kind kind, const GridField& f);

// Grid samples of a smooth radial bump supported in r_in < |z - center| < r_out, times smooth
// component modulations; zero outside M.
GridField radial_bump(Kind kind, const ChartGeometry& g, const Grid& grid, const Vec& center, double r_in, double r_out);

LayerSchedule schedule_from(const ScheduleSpec& spec, int dim);

}  // namespace magtomo
