#pragma once

#include "magtomo/geometry.hpp"
#include "magtomo/grid.hpp"

#include <memory>

namespace magtomo {

enum class Kind { BF, HB };
const char* kind_name(Kind k);

// Symmetric 2-tensors are stored upper-triangular, row-major: (0,0), (0,1), .., (1,1), ..
int sym_size(int n);
int sym_index(int n, int i, int j);
Mat sym_unpack(int n, const Vec& packed);
Vec sym_pack(const Mat& h);
// h_ij v^i v^j from packed storage.
double sym_quadratic(int n, const Vec& packed, const Vec& v);

// A component field: grid-backed or analytic. jacobian(z)(c, k) = d_k f_c; finite differences when absent.
struct Field {
  int ncomp = 0;
  VecFn value;
  MatFn jacobian;

  Field() = default;
  Field(int ncomp_, VecFn value_, MatFn jacobian_ = nullptr)
      : ncomp(ncomp_), value(std::move(value_)), jacobian(std::move(jacobian_)) {}
  static Field zero(int ncomp);
  static Field from_grid(const GridField& f);

  bool empty() const { return !value; }
  Vec operator()(const Vec& z) const { return value ? value(z) : Vec::Zero(ncomp); }
  Mat jac(const Vec& z) const;
};

Field operator+(const Field& a, const Field& b);
Field operator*(double s, const Field& a);

// BF: first = beta (n components), second = phi (1). HB: first = h (sym_size(n)), second = beta (n).
struct TensorPair {
  Kind kind = Kind::BF;
  int dim = 3;
  Field first, second;
  ScalarFn support;  // evaluate returns 0 where support(z) < 0

  static TensorPair zero(Kind kind, int dim);
  int first_size() const;
  int second_size() const;
};

TensorPair operator+(const TensorPair& a, const TensorPair& b);
TensorPair operator*(double s, const TensorPair& a);

// psi(z, v) = c0 + c1_i v^i + c2_ij v^i v^j; missing coefficients are zero.
struct FiberPolynomial {
  int dim = 3;
  Field c0, c1, c2;
};

double evaluate(const TensorPair& f, const Vec& z, const Vec& v);
double evaluate(const FiberPolynomial& psi, const Vec& z, const Vec& v);

// ---- grid operators (derivative on the grid, then interpolation) ----

GridField d_scalar(const GridField& p);
GridField d_sym(const ChartGeometry& g, const GridField& u);
// (E(u))_i = -u_j E^j_i, the lowered action of E on the raised form.
GridField lorentz_on_oneform(const ChartGeometry& g, const GridField& u);
TensorPair gauge_bf(const GridField& p, ScalarFn support = nullptr);
TensorPair gauge_hb(const ChartGeometry& g, const GridField& u, const GridField& p, ScalarFn support = nullptr);

// ---- analytic operators (exact derivatives from Field::jac) ----

Field d_scalar(const Field& p, int dim);
Field d_sym(const ChartGeometry& g, const Field& u);
Field lorentz_on_oneform(const ChartGeometry& g, const Field& u);
TensorPair gauge_bf(const Field& p, int dim, ScalarFn support = nullptr);
TensorPair gauge_hb(const ChartGeometry& g, const Field& u, const Field& p, ScalarFn support = nullptr);

// Generator of the magnetic flow applied to a fiber polynomial:
// d/dz psi . v + d/dv psi . (-Gamma(v, v) + E(v)).
double gmu_apply(const ChartGeometry& g, const FiberPolynomial& psi, const Vec& z, const Vec& v);

// psi = u_i v^i + p
FiberPolynomial potential_polynomial(int dim, const Field& u, const Field& p);

}  // namespace magtomo
