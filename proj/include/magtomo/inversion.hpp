#pragma once

#include "magtomo/discretization.hpp"
#include "magtomo/normalop.hpp"

#include <optional>

namespace magtomo {

using LinearMap = std::function<Vec(const Vec&)>;

// Preconditioned conjugate gradient for a symmetric positive definite operator.
struct CgResult {
  Vec x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};
CgResult conjugate_gradient(const LinearMap& A, const Vec& b, const LinearMap& precond, double rel_tol,
                            int max_iter, const Vec& x0 = Vec());
LinearMap jacobi(const Vec& diagonal);

// Witten Laplacian delta_F d_F on the potential space of a layer. delta_F is the exact adjoint of the
// discrete d_F under the mass matrices, so the stiffness D^T M D is symmetric by construction.
// Potentials vanish at every grid node outside the potential set (Dirichlet condition).
struct GaugeProjector {
  const LayerSpace* space = nullptr;
  SpMat stiffness;   // D^T M D
  SpMat mpot_inv;    // block inverse of Mpot
  double tol = 1e-12;
  double min_ritz = 0.0;  // smallest Ritz value of the stiffness in Mpot-units, from Lanczos on CG data

  explicit GaugeProjector(const LayerSpace& sp, double tol = 1e-12);
  Vec delta(const Vec& c) const { return mpot_inv * (space->D.transpose() * (space->M * c)); }
  Vec d(const Vec& p) const { return space->D * p; }
  // Solves delta_F d_F p = rhs; NonConvergence after 10 N iterations.
  Vec witten_solve(const Vec& rhs, int* iterations = nullptr) const;
};

struct Split {
  Vec solenoidal;
  Vec potential_part;
  Vec potential;  // BF p; HB (u, p) per potential node
};
Split solenoidal_split(const GaugeProjector& proj, const Vec& c);

struct InversionParams {
  double reg = -1.0;          // < 0: reg_factor ||T||^2
  double reg_factor = 0.1;
  double ridge = 1e-6;        // relative weight of ||c||^2 against the gauge penalty
  double cg_tol = 1e-8;
  int max_iter = 4000;
  double ill_posed_residual = 1e-3;
  // Up to this many unknowns the normal matrix is assembled densely and its Cholesky factor preconditions CG.
  std::size_t dense_limit = 16000;
  bool chi_row_weights = true;  // rows scaled by chi(s), the J weight of the normal operator
};

struct InversionResult {
  Vec coeffs;           // minimizer
  Vec solenoidal;       // canonical representative S(coeffs)
  double reg = 0.0;
  double residual = 0.0;        // ||T c - d|| / ||d||
  double gauge_residual = 0.0;  // ||delta_F S|| / ||S||
  double cg_residual = 0.0;
  int iterations = 0;
  bool ill_posed = false;
  std::optional<double> relative_error;   // ||S(c) - S(truth)|| / ||S(truth)|| in the M-norm
  std::optional<double> stability_ratio;  // ||S(c - truth)|| / ||If||
};

// Tikhonov least squares with gauge penalty reg ||delta_F c||^2 + 1e-6 reg ||c||^2, then the split.
// `data` are physical transform values per ray; they are conjugated by e^{-F/x_base} here.
InversionResult invert_local(const LayerSpace& space, const GaugeProjector& proj, const std::vector<Ray>& rays,
                             const Vec& data, const Cutoff& chi, const InversionParams& prm = {},
                             const Vec* truth = nullptr);

// Forward-orbit integral of f from (z, v) to the exit: the solution of G u = -f vanishing at outgoing points.
double transport_solution(const ChartGeometry& g, const TensorPair& f, const Vec& z, const Vec& v,
                          double t_max = 50.0);

}  // namespace magtomo
