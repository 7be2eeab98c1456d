#pragma once

#include "magtomo/discretization.hpp"
#include "magtomo/flow.hpp"
#include "magtomo/tensorfields.hpp"

namespace magtomo {

// Truncated Gaussian exp(-s^2 / (2 mu)) with a smooth taper on [3 sqrt(mu), 4 sqrt(mu)].
struct Cutoff {
  double mu = 1.0;

  double support() const { return 4.0 * std::sqrt(mu); }
  double operator()(double s) const;
  double l1_norm() const;
};

// Quadrature points and weights on the unit sphere S^{d-1} in R^d.
struct SphereRule {
  std::vector<Vec> points;
  std::vector<double> weights;
};
SphereRule sphere_rule(int ambient_dim, int order);
double sphere_area(int ambient_dim);

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int m, double a, double b, std::vector<double>& nodes, std::vector<double>& weights);

// Scattering metric at (x, y): g_sc = x^-4 dx^2 + x^-2 h.
struct ScatteringFrame {
  double x = 1.0;
  Mat h;  // (n-1) x (n-1)
};
ScatteringFrame scattering_frame(const ChartGeometry& g, const LocalChart& chart, double x, const Vec& y);

// Averages of a measurement function v(lambda, omega) at fixed (x, y).
// order 0: scalar; order 1: covector (dx, dy_1..); order 2: packed symmetric tensor.
Vec j_average(int order, const std::function<double(double, const Vec&)>& v, const Cutoff& chi,
              const ScatteringFrame& frame, int n_s = 96, int n_omega = 32);

// alpha(omega) = omega^T plus omega + minus . omega on the unit sphere of the y-directions.
struct AlphaModel {
  Mat plus;
  Vec minus;

  static AlphaModel isotropic(int n_minus_1, double value = 1.0);
  double operator()(const Vec& yhat) const { return yhat.dot(plus * yhat) + minus.dot(yhat); }
};

// Even/odd split of alpha samples at (x, y, 0, omega) followed by least-squares fits.
AlphaModel fit_alpha(const ChartGeometry& g, const LocalChart& chart, double x, const Vec& y, int n_omega = 16);

// Default b: -dx(E(d/dy_k)) at the chart base point.
Vec default_b(const ChartGeometry& g, const LocalChart& chart);

struct SymbolParams {
  Kind kind = Kind::BF;
  int dim = 3;
  double F = 1.0;
  AlphaModel alpha;
  Mat a;  // (n-1) x (n-1) symmetric
  Vec b;  // n-1

  static SymbolParams defaults(Kind kind, int dim, double F);
};

enum class Side { D, Delta };

// Reduced component counts: BF (beta0, beta', phi); HB (h_xx, h_xy, h_yy packed, beta_x, beta_y).
int symbol_field_size(Kind kind, int dim);
int symbol_potential_size(Kind kind, int dim);

// Gauge-operator symbols at (xi, eta). The Delta side is D^* G with G the tensor inner product
// (off-diagonal symmetric entries counted twice).
CMat symbol_gauge(const SymbolParams& prm, Side side, double xi, const Vec& eta);

// Gaussian-cutoff scattering symbol at a finite point.
CMat sc_symbol(const SymbolParams& prm, double xi, const Vec& eta, const SphereRule& rule);

// Standard principal symbol at fiber infinity: |zeta|^-1 integral over {xi S + eta . Yhat = 0} of chi(S) w w^T.
Mat infinity_symbol(Kind kind, int dim, double xi, const Vec& eta, const Cutoff& chi, int order = 64);

// Orthonormal basis of the null space of `delta` (columns).
CMat kernel_basis(const CMat& delta, double tol = 1e-10);

struct FreqGrid {
  double xi_max = 3.0;
  double eta_max = 3.0;
  int n_xi = 7;
  int n_eta = 7;    // per eta component
  int n_inf = 200;  // directions on the unit sphere for the infinity mode
  int sphere_order = 48;
};

enum class ScanMode { Finite, Infinity };

struct ScanReport {
  double min_eig = 0.0;
  double argmin_xi = 0.0;
  Vec argmin_eta;
  int kernel_dim_min = 0, kernel_dim_max = 0;
  std::size_t frequencies = 0;
  bool empty_kernel = false;
  bool positive = false;  // min_eig > 1e-10
};

ScanReport ellipticity_scan(const SymbolParams& prm, const FreqGrid& grid, ScanMode mode, bool restricted = true);

// Smallest F (2 significant digits) with a positive restricted finite scan; doubling then bisection.
double find_F0(const SymbolParams& prm, const FreqGrid& grid, ScanReport* report = nullptr);

// Front-face kernel matrix (without the e^{-FX} |Y|^{1-n} prefactor when `bracket_only`).
Mat front_face_kernel(Kind kind, double X, const Vec& Y, double F, const Cutoff& chi, const AlphaModel& alpha,
                      bool bracket_only = false);

// Discrete localized normal operator: W^-1 (J_1, J_0) or W^-1 (J_2, J_1) applied to the conjugated
// transform rows, evaluated at the family base points (x_i, y_j).
struct NormalOperator {
  Kind kind = Kind::BF;
  int out_comps = 0;               // per base point: (J_1 | J_2) block then (J_0 | J_1) block
  std::vector<Vec> base_xy;        // (x, y) of each output point
  SpMat T;                         // rays x field dofs
  SpMat J;                         // outputs x rays, W^-1 folded in
  std::vector<Ray> rays;

  Vec apply(const Vec& c) const { return J * (T * c); }
  // Same pipeline on a continuum pair: e^{-F/x_base} I(f) per ray, then J.
  Vec apply_continuous(const TensorPair& f, double F) const;
  Vec transform_rows(const TensorPair& f, double F) const;
};

// J quadrature over the family's (lambda, omega) samples with weights chi(s) ds dlambda-Jacobian and
// uniform omega weights; entries rejected by the family contribute nothing.
NormalOperator assemble_normal(const LayerSpace& space, const Family& family, const Cutoff& chi);

}  // namespace magtomo
