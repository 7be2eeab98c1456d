#pragma once

#include "magtomo/flow.hpp"
#include "magtomo/grid.hpp"
#include "magtomo/tensorfields.hpp"
#include "magtomo/transform.hpp"

#include <Eigen/Sparse>

namespace magtomo {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// e^{F/x} W with W = diag(1, 1/x) acting on (first, second) of a pair; x is a positive layer function.
struct ConjugationWeight {
  double F = 1.0;
  double x_min = 0.0;
  ScalarFn x;
  VecFn grad_x;

  static ConjugationWeight from_chart(const LocalChart& chart, double F, double x_min);
  // ConjugationOverflow if F / x_min > 700.
  void check() const;
};

// A measured geodesic with the layer coordinate of its base point and s = lambda / x.
struct Ray {
  const GeodesicPath* path = nullptr;
  double x_base = 1.0;
  double s = 0.0;
};

std::vector<Ray> rays_from_family(const Family& family);

// Conjugated unknowns c = (W^{-1} e^{-F/x} f) at active grid nodes, with potentials at interior nodes.
// Inner products: node volume sqrt(det g) times the metric Gram of each component block.
struct LayerSpace {
  Kind kind = Kind::BF;
  int dim = 3;
  const ChartGeometry* geo = nullptr;
  Grid grid;
  ConjugationWeight weight;
  int ncomp = 0;  // per field node: first then second
  int pcomp = 0;  // per potential node: BF p; HB (u_1..u_n, p)
  std::vector<std::size_t> field_nodes, pot_nodes;
  std::vector<int> field_slot, pot_slot;  // grid node -> active index or -1
  SpMat M, Mpot, D;                       // field mass, potential mass, conjugated gauge map

  std::size_t field_dofs() const { return field_nodes.size() * ncomp; }
  std::size_t pot_dofs() const { return pot_nodes.size() * pcomp; }

  // Physical pair components at z: e^{F/x} W interp(c); zero where x <= 0.
  void physical(const Vec& c, const Vec& z, Vec& first, Vec& second) const;
  double evaluate(const Vec& c, const Vec& z, const Vec& v) const;
  Integrand integrand(const Vec& c) const;
  // Node coefficients sampled from a conjugated field given as (first, second) callables.
  Vec sample(const VecFn& first, const VecFn& second) const;
  // Conjugated coefficients of a physical pair: W^{-1} e^{-F/x} f at the nodes.
  Vec conjugate(const TensorPair& f) const;
  double norm(const Vec& c) const { return std::sqrt(c.dot(M * c)); }
};

// Field nodes: `keep(node)`, x > x_min and rho > 0. Potential nodes: field nodes off the box edge.
LayerSpace make_layer_space(Kind kind, const ChartGeometry& g, const Grid& grid, const ConjugationWeight& w,
                            const std::function<bool(std::size_t)>& keep);

// Grid nodes whose interpolation stencil touches a quadrature node of some ray.
std::vector<char> touched_nodes(const Grid& grid, const std::vector<Ray>& rays);

// Row r: e^{-F/x_base} I(e^{F/x} W interp(c)) along ray r, times row_scale[r] when given.
SpMat forward_matrix(const LayerSpace& space, const std::vector<Ray>& rays, const Vec& row_scale = Vec());

// Box around all quadrature nodes, padded by `pad` times the extent.
void ray_bbox(const std::vector<Ray>& rays, int dim, Vec& lo, Vec& hi, double pad = 0.02);

}  // namespace magtomo
