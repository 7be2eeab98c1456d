#pragma once

#include "magtomo/core.hpp"
#include "magtomo/expr.hpp"

#include <optional>
#include <string>
#include <vector>

namespace magtomo {

// dg[k](i, j) = d_k g_ij
using MetricDerivs = std::vector<Mat>;
using MetricDerivFn = std::function<MetricDerivs(const Vec&)>;

// Chart-represented manifold M = {rho >= 0} inside one coordinate box.
// Immutable after construction; all queries are const and thread-safe.
struct ChartGeometry {
  int dim = 3;
  MatFn metric;
  std::optional<MetricDerivFn> metric_derivs;  // finite differences when absent
  MatFn magnetic;                              // antisymmetric Omega_ij
  ScalarFn boundary_fn;                        // rho, positive inside M
  std::optional<VecFn> boundary_grad;
  std::optional<MatFn> boundary_hess;
  Vec bbox_lo, bbox_hi;
  bool flat_metric = false;   // metric is constant: Christoffels vanish identically
  bool zero_field = false;    // Omega == 0
  bool periodic = false;      // positions wrap inside bbox (diagnostic geometries only)
  std::string description;

  bool in_bbox(const Vec& z, double slack = 0.0) const;
  Vec wrap(const Vec& z) const;
  double diameter() const { return (bbox_hi - bbox_lo).norm(); }
};

// Rank-3 array Gamma^i_{jk}, stored i-major.
struct Christoffel {
  int n = 0;
  std::vector<double> data;
  double operator()(int i, int j, int k) const { return data[(i * n + j) * n + k]; }
  double& at(int i, int j, int k) { return data[(i * n + j) * n + k]; }
  // Gamma^i_{jk} v^j w^k
  Vec contract(const Vec& v, const Vec& w) const;
};

// Unit inward normal and g-orthonormal tangent basis at a boundary point.
struct BoundaryFrame {
  Vec z;
  Vec normal;
  std::vector<Vec> tangent;
};

double metric_fd_step(double zk);

// Central-difference derivatives of an arbitrary scalar function.
Vec fd_gradient(const ScalarFn& f, const Vec& z);
Mat fd_hessian(const ScalarFn& f, const Vec& z);

Mat metric_inverse(const ChartGeometry& g, const Vec& z);
MetricDerivs metric_derivatives(const ChartGeometry& g, const Vec& z);
Christoffel christoffel(const ChartGeometry& g, const Vec& z);

// Matrix L with L(j, i) = E^j_i, so E_z(v) = L v and <E(v), w>_g = Omega(v, w).
Mat lorentz_matrix(const ChartGeometry& g, const Vec& z);
Vec lorentz(const ChartGeometry& g, const Vec& z, const Vec& v);

double closedness_residual(const ChartGeometry& g, const std::vector<Vec>& points);

Vec boundary_gradient(const ChartGeometry& g, const Vec& z);
Mat boundary_hessian(const ChartGeometry& g, const Vec& z);

double inner(const ChartGeometry& g, const Vec& z, const Vec& a, const Vec& b);
double gnorm(const ChartGeometry& g, const Vec& z, const Vec& a);

// Frame of a level set of any defining function (positive on the side `normal` points into).
BoundaryFrame level_frame(const ChartGeometry& g, const Vec& z, const Vec& dfun);
BoundaryFrame boundary_frame(const ChartGeometry& g, const Vec& z);

// Lambda(z, v) from the acceleration of rho along the ordinary geodesic.
double second_fundamental_form(const ChartGeometry& g, const BoundaryFrame& frame, const Vec& v);

// Newton projection of z onto {rho = 0} along the gradient.
Vec project_to_boundary(const ChartGeometry& g, const Vec& z);

// ---- builders ----

ChartGeometry euclidean_geometry(int n);
void set_metric_conformal(ChartGeometry& g, const Expr& c);      // g = c(z)^2 Id
void set_metric_radial_speed(ChartGeometry& g, const Expr& c);   // g = c(|z|)^-2 Id
void set_field_zero(ChartGeometry& g);
void set_field_constant(ChartGeometry& g, double B);             // Omega = B dz1 ^ dz2
void set_field_potential(ChartGeometry& g, const std::vector<Expr>& A);  // Omega = dA
void set_boundary_ball(ChartGeometry& g, double r);
void set_boundary_halfspace(ChartGeometry& g);                   // M = {z1 >= 0}
void set_boundary_expression(ChartGeometry& g, const Expr& rho);

}  // namespace magtomo
