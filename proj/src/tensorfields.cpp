#include "magtomo/tensorfields.hpp"

#include <cmath>

namespace magtomo {

const char* kind_name(Kind k) { return k == Kind::BF ? "bf" : "hb"; }

int sym_size(int n) { return n * (n + 1) / 2; }

int sym_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

Mat sym_unpack(int n, const Vec& packed) {
  Mat h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) h(i, j) = h(j, i) = packed[sym_index(n, i, j)];
  return h;
}

Vec sym_pack(const Mat& h) {
  const int n = static_cast<int>(h.rows());
  Vec out(sym_size(n));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out[sym_index(n, i, j)] = 0.5 * (h(i, j) + h(j, i));
  return out;
}

double sym_quadratic(int n, const Vec& packed, const Vec& v) {
  double s = 0.0;
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++k) s += (i == j ? 1.0 : 2.0) * packed[k] * v[i] * v[j];
  return s;
}

// ---- Field ----

Field Field::zero(int ncomp) {
  return Field(ncomp, [ncomp](const Vec&) { return Vec::Zero(ncomp); },
               [ncomp](const Vec& z) { return Mat::Zero(ncomp, z.size()); });
}

Field Field::from_grid(const GridField& f) {
  auto shared = std::make_shared<const GridField>(f);
  return Field(f.ncomp, [shared](const Vec& z) { return (*shared)(z); });
}

Mat Field::jac(const Vec& z) const {
  if (jacobian) return jacobian(z);
  const int n = static_cast<int>(z.size());
  Mat J(ncomp, n);
  for (int k = 0; k < n; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(z[k]));
    Vec zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    J.col(k) = ((*this)(zp) - (*this)(zm)) / (2.0 * h);
  }
  return J;
}

Field operator+(const Field& a, const Field& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  MatFn jac;
  if (a.jacobian && b.jacobian) jac = [a, b](const Vec& z) -> Mat { return a.jacobian(z) + b.jacobian(z); };
  return Field(a.ncomp, [a, b](const Vec& z) -> Vec { return a(z) + b(z); }, jac);
}

Field operator*(double s, const Field& a) {
  if (a.empty()) return a;
  MatFn jac;
  if (a.jacobian) jac = [a, s](const Vec& z) -> Mat { return s * a.jacobian(z); };
  return Field(a.ncomp, [a, s](const Vec& z) -> Vec { return s * a(z); }, jac);
}

// ---- TensorPair ----

TensorPair TensorPair::zero(Kind kind, int dim) {
  TensorPair p;
  p.kind = kind;
  p.dim = dim;
  p.first = Field::zero(p.first_size());
  p.second = Field::zero(p.second_size());
  return p;
}

int TensorPair::first_size() const { return kind == Kind::BF ? dim : sym_size(dim); }
int TensorPair::second_size() const { return kind == Kind::BF ? 1 : dim; }

TensorPair operator+(const TensorPair& a, const TensorPair& b) {
  if (a.kind != b.kind || a.dim != b.dim) throw ValidationError("field.kind", "adding pairs of different kinds");
  TensorPair out = a;
  out.first = a.first + b.first;
  out.second = a.second + b.second;
  if (a.support && b.support) {
    ScalarFn sa = a.support, sb = b.support;
    out.support = [sa, sb](const Vec& z) { return std::max(sa(z), sb(z)); };
  } else {
    out.support = nullptr;
  }
  return out;
}

TensorPair operator*(double s, const TensorPair& a) {
  TensorPair out = a;
  out.first = s * a.first;
  out.second = s * a.second;
  return out;
}

double evaluate(const TensorPair& f, const Vec& z, const Vec& v) {
  if (f.support && f.support(z) < 0.0) return 0.0;
  if (f.kind == Kind::BF) return f.first(z).dot(v) + f.second(z)[0];
  return sym_quadratic(f.dim, f.first(z), v) + f.second(z).dot(v);
}

double evaluate(const FiberPolynomial& psi, const Vec& z, const Vec& v) {
  double s = 0.0;
  if (!psi.c0.empty()) s += psi.c0(z)[0];
  if (!psi.c1.empty()) s += psi.c1(z).dot(v);
  if (!psi.c2.empty()) s += sym_quadratic(psi.dim, psi.c2(z), v);
  return s;
}

// ---- grid operators ----

GridField d_scalar(const GridField& p) {
  const int n = p.grid.dim;
  GridField out(p.grid, n);
  for (std::size_t k = 0; k < p.grid.size(); ++k)
    for (int a = 0; a < n; ++a) out.data[k * n + a] = p.diff(k, 0, a);
  return out;
}

GridField d_sym(const ChartGeometry& g, const GridField& u) {
  const int n = u.grid.dim;
  GridField out(u.grid, sym_size(n));
  for (std::size_t k = 0; k < u.grid.size(); ++k) {
    Mat du(n, n);  // du(i, j) = d_i u_j
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) du(i, j) = u.diff(k, j, i);
    Mat h = 0.5 * (du + du.transpose());
    if (!g.flat_metric) {
      Vec z = u.grid.node(k);
      Christoffel G = christoffel(g, z);
      Vec uk = u.at(k);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int m = 0; m < n; ++m) h(i, j) -= G(m, i, j) * uk[m];
    }
    out.set(k, sym_pack(h));
  }
  return out;
}

namespace {
Vec lower_lorentz(const ChartGeometry& g, const Vec& z, const Vec& u) {
  if (g.zero_field) return Vec::Zero(u.size());
  return -(lorentz_matrix(g, z).transpose() * u);
}
}  // namespace

GridField lorentz_on_oneform(const ChartGeometry& g, const GridField& u) {
  GridField out(u.grid, u.ncomp);
  for (std::size_t k = 0; k < u.grid.size(); ++k) out.set(k, lower_lorentz(g, u.grid.node(k), u.at(k)));
  return out;
}

TensorPair gauge_bf(const GridField& p, ScalarFn support) {
  TensorPair out;
  out.kind = Kind::BF;
  out.dim = p.grid.dim;
  out.first = Field::from_grid(d_scalar(p));
  out.second = Field::zero(1);
  out.support = std::move(support);
  return out;
}

TensorPair gauge_hb(const ChartGeometry& g, const GridField& u, const GridField& p, ScalarFn support) {
  TensorPair out;
  out.kind = Kind::HB;
  out.dim = u.grid.dim;
  out.first = Field::from_grid(d_sym(g, u));
  GridField beta = d_scalar(p);
  GridField eu = lorentz_on_oneform(g, u);
  beta.data -= eu.data;
  out.second = Field::from_grid(beta);
  out.support = std::move(support);
  return out;
}

// ---- analytic operators ----

Field d_scalar(const Field& p, int dim) {
  return Field(dim, [p](const Vec& z) -> Vec { return p.jac(z).row(0).transpose(); });
}

Field d_sym(const ChartGeometry& g, const Field& u) {
  const ChartGeometry* gp = &g;
  return Field(sym_size(g.dim), [gp, u](const Vec& z) -> Vec {
    const int n = static_cast<int>(z.size());
    Mat du = u.jac(z).transpose();  // du(i, j) = d_i u_j
    Mat h = 0.5 * (du + du.transpose());
    if (!gp->flat_metric) {
      Christoffel G = christoffel(*gp, z);
      Vec uz = u(z);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int m = 0; m < n; ++m) h(i, j) -= G(m, i, j) * uz[m];
    }
    return sym_pack(h);
  });
}

Field lorentz_on_oneform(const ChartGeometry& g, const Field& u) {
  const ChartGeometry* gp = &g;
  return Field(u.ncomp, [gp, u](const Vec& z) -> Vec { return lower_lorentz(*gp, z, u(z)); });
}

TensorPair gauge_bf(const Field& p, int dim, ScalarFn support) {
  TensorPair out;
  out.kind = Kind::BF;
  out.dim = dim;
  out.first = d_scalar(p, dim);
  out.second = Field::zero(1);
  out.support = std::move(support);
  return out;
}

TensorPair gauge_hb(const ChartGeometry& g, const Field& u, const Field& p, ScalarFn support) {
  TensorPair out;
  out.kind = Kind::HB;
  out.dim = g.dim;
  out.first = d_sym(g, u);
  Field dp = d_scalar(p, g.dim);
  Field eu = lorentz_on_oneform(g, u);
  out.second = Field(g.dim, [dp, eu](const Vec& z) -> Vec { return dp(z) - eu(z); });
  out.support = std::move(support);
  return out;
}

double gmu_apply(const ChartGeometry& g, const FiberPolynomial& psi, const Vec& z, const Vec& v) {
  const int n = static_cast<int>(z.size());
  Vec acc = lorentz(g, z, v);
  if (!g.flat_metric) acc -= christoffel(g, z).contract(v, v);
  double horiz = 0.0, vert = 0.0;
  if (!psi.c0.empty()) horiz += psi.c0.jac(z).row(0).dot(v);
  if (!psi.c1.empty()) {
    horiz += v.dot(psi.c1.jac(z) * v);
    vert += psi.c1(z).dot(acc);
  }
  if (!psi.c2.empty()) {
    Mat J = psi.c2.jac(z);
    Vec dir = J * v;
    horiz += sym_quadratic(n, dir, v);
    vert += 2.0 * (sym_unpack(n, psi.c2(z)) * v).dot(acc);
  }
  return horiz + vert;
}

FiberPolynomial potential_polynomial(int dim, const Field& u, const Field& p) {
  FiberPolynomial psi;
  psi.dim = dim;
  psi.c0 = p;
  psi.c1 = u;
  return psi;
}

}  // namespace magtomo
