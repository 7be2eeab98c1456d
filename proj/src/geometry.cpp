#include "magtomo/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace magtomo {

const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SingularMetric: return "SingularMetric";
    case ErrorCode::NotOnBoundary: return "NotOnBoundary";
    case ErrorCode::LeftChart: return "LeftChart";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::EmptyFamily: return "EmptyFamily";
    case ErrorCode::DegenerateLevel: return "DegenerateLevel";
    case ErrorCode::TrappedPath: return "TrappedPath";
    case ErrorCode::TrappedOrbit: return "TrappedOrbit";
    case ErrorCode::ConjugationOverflow: return "ConjugationOverflow";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::IllPosed: return "IllPosed";
    case ErrorCode::LayerFailure: return "LayerFailure";
    case ErrorCode::EmptyKernel: return "EmptyKernel";
    case ErrorCode::Validation: return "Validation";
  }
  return "Unknown";
}

const char* version() { return MAGTOMO_VERSION; }

bool ChartGeometry::in_bbox(const Vec& z, double slack) const {
  for (int i = 0; i < dim; ++i)
    if (z[i] < bbox_lo[i] - slack || z[i] > bbox_hi[i] + slack) return false;
  return true;
}

Vec ChartGeometry::wrap(const Vec& z) const {
  Vec w = z;
  for (int i = 0; i < dim; ++i) {
    double L = bbox_hi[i] - bbox_lo[i];
    w[i] = bbox_lo[i] + std::fmod(std::fmod(z[i] - bbox_lo[i], L) + L, L);
  }
  return w;
}

Vec Christoffel::contract(const Vec& v, const Vec& w) const {
  Vec out = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double* row = &data[(i * n + j) * n];
      double t = 0.0;
      for (int k = 0; k < n; ++k) t += row[k] * w[k];
      s += v[j] * t;
    }
    out[i] = s;
  }
  return out;
}

double metric_fd_step(double zk) { return 1e-5 * std::max(1.0, std::abs(zk)); }

Vec fd_gradient(const ScalarFn& f, const Vec& z) {
  Vec d(z.size());
  Vec zp = z, zm = z;
  for (int k = 0; k < z.size(); ++k) {
    double h = metric_fd_step(z[k]);
    zp[k] = z[k] + h;
    zm[k] = z[k] - h;
    d[k] = (f(zp) - f(zm)) / (2.0 * h);
    zp[k] = zm[k] = z[k];
  }
  return d;
}

// second differences; the 1e-4 step balances h^2 truncation against eps/h^2 roundoff
Mat fd_hessian(const ScalarFn& f, const Vec& z) {
  const int n = static_cast<int>(z.size());
  Mat H(n, n);
  const double f0 = f(z);
  for (int i = 0; i < n; ++i) {
    double hi = 1e-4 * std::max(1.0, std::abs(z[i]));
    Vec p = z, m = z;
    p[i] += hi;
    m[i] -= hi;
    H(i, i) = (f(p) - 2.0 * f0 + f(m)) / (hi * hi);
    for (int j = i + 1; j < n; ++j) {
      double hj = 1e-4 * std::max(1.0, std::abs(z[j]));
      Vec pp = z, pm = z, mp = z, mm = z;
      pp[i] += hi; pp[j] += hj;
      pm[i] += hi; pm[j] -= hj;
      mp[i] -= hi; mp[j] += hj;
      mm[i] -= hi; mm[j] -= hj;
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * hi * hj);
    }
  }
  return H;
}

namespace {

// Cholesky with a cheap screen; the full eigen check only runs on suspicious pivots.
Eigen::LLT<Mat> checked_llt(const ChartGeometry& geo, const Vec& z) {
  Mat g = geo.metric(z);
  Eigen::LLT<Mat> llt(g);
  bool suspicious = llt.info() != Eigen::Success;
  if (!suspicious) {
    Vec d = Mat(llt.matrixL()).diagonal().array().square();
    suspicious = d.minCoeff() < 1e-3 * d.maxCoeff() || d.minCoeff() < 1e-6;
  }
  if (suspicious) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()));
    double lmin = es.eigenvalues().minCoeff();
    if (lmin < 1e-10) {
      std::ostringstream os;
      os << "metric eigenvalue " << lmin << " below 1e-10 at z = " << z.transpose();
      throw Error(ErrorCode::SingularMetric, os.str());
    }
  }
  return llt;
}

}  // namespace

Mat metric_inverse(const ChartGeometry& g, const Vec& z) {
  auto llt = checked_llt(g, z);
  return llt.solve(Mat::Identity(g.dim, g.dim));
}

MetricDerivs metric_derivatives(const ChartGeometry& g, const Vec& z) {
  if (g.metric_derivs) return (*g.metric_derivs)(z);
  MetricDerivs dg(g.dim);
  if (g.flat_metric) {
    for (auto& m : dg) m = Mat::Zero(g.dim, g.dim);
    return dg;
  }
  Vec zp = z, zm = z;
  for (int k = 0; k < g.dim; ++k) {
    double h = metric_fd_step(z[k]);
    zp[k] = z[k] + h;
    zm[k] = z[k] - h;
    dg[k] = (g.metric(zp) - g.metric(zm)) / (2.0 * h);
    zp[k] = zm[k] = z[k];
  }
  return dg;
}

Christoffel christoffel(const ChartGeometry& g, const Vec& z) {
  const int n = g.dim;
  Christoffel G;
  G.n = n;
  G.data.assign(static_cast<std::size_t>(n * n * n), 0.0);
  Mat ginv = metric_inverse(g, z);
  if (g.flat_metric) return G;
  MetricDerivs dg = metric_derivatives(g, z);
  // lowered symbols Gamma_{l jk} = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
  std::vector<double> low(static_cast<std::size_t>(n * n * n));
  for (int l = 0; l < n; ++l)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        double v = 0.5 * (dg[j](l, k) + dg[k](l, j) - dg[l](j, k));
        low[(l * n + j) * n + k] = v;
        low[(l * n + k) * n + j] = v;
      }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += ginv(i, l) * low[(l * n + j) * n + k];
        G.at(i, j, k) = s;
        G.at(i, k, j) = s;
      }
  return G;
}

Mat lorentz_matrix(const ChartGeometry& g, const Vec& z) {
  if (g.zero_field) {
    checked_llt(g, z);
    return Mat::Zero(g.dim, g.dim);
  }
  auto llt = checked_llt(g, z);
  Mat om = g.magnetic(z);
  // E^j = g^{jk} Omega_ik v^i
  return llt.solve(Mat(om.transpose()));
}

Vec lorentz(const ChartGeometry& g, const Vec& z, const Vec& v) { return lorentz_matrix(g, z) * v; }

double closedness_residual(const ChartGeometry& g, const std::vector<Vec>& points) {
  const int n = g.dim;
  double worst = 0.0;
  for (const Vec& z : points) {
    std::vector<Mat> dO(n);
    Vec zp = z, zm = z;
    for (int k = 0; k < n; ++k) {
      double h = 1e-4 * std::max(1.0, std::abs(z[k]));
      zp[k] = z[k] + h;
      zm[k] = z[k] - h;
      dO[k] = (g.magnetic(zp) - g.magnetic(zm)) / (2.0 * h);
      zp[k] = zm[k] = z[k];
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k)
          worst = std::max(worst, std::abs(dO[i](j, k) + dO[j](k, i) + dO[k](i, j)));
  }
  return worst;
}

Vec boundary_gradient(const ChartGeometry& g, const Vec& z) {
  if (g.boundary_grad) return (*g.boundary_grad)(z);
  return fd_gradient(g.boundary_fn, z);
}

Mat boundary_hessian(const ChartGeometry& g, const Vec& z) {
  if (g.boundary_hess) return (*g.boundary_hess)(z);
  const int n = g.dim;
  Mat H(n, n);
  if (g.boundary_grad) {
    Vec zp = z, zm = z;
    for (int k = 0; k < n; ++k) {
      double h = metric_fd_step(z[k]);
      zp[k] = z[k] + h;
      zm[k] = z[k] - h;
      H.col(k) = ((*g.boundary_grad)(zp) - (*g.boundary_grad)(zm)) / (2.0 * h);
      zp[k] = zm[k] = z[k];
    }
    return 0.5 * (H + H.transpose());
  }
  return fd_hessian(g.boundary_fn, z);
}

double inner(const ChartGeometry& g, const Vec& z, const Vec& a, const Vec& b) {
  return a.dot(g.metric(z) * b);
}

double gnorm(const ChartGeometry& g, const Vec& z, const Vec& a) { return std::sqrt(inner(g, z, a, a)); }

BoundaryFrame level_frame(const ChartGeometry& g, const Vec& z, const Vec& dfun) {
  const int n = g.dim;
  BoundaryFrame fr;
  fr.z = z;
  Mat ginv = metric_inverse(g, z);
  Mat gm = g.metric(z);
  Vec nu = ginv * dfun;
  double len = std::sqrt(dfun.dot(nu));
  if (!(len > 0.0)) throw Error(ErrorCode::DegenerateLevel, "vanishing gradient of defining function");
  nu /= len;
  fr.normal = nu;
  for (int i = 0; i < n && static_cast<int>(fr.tangent.size()) < n - 1; ++i) {
    Vec t = Vec::Unit(n, i);
    t -= nu.dot(gm * t) * nu;
    for (const Vec& s : fr.tangent) t -= s.dot(gm * t) * s;
    double tl = std::sqrt(t.dot(gm * t));
    if (tl < 1e-6) continue;
    t /= tl;
    // one re-orthogonalisation pass keeps the frame orthonormal to ~1e-16
    t -= nu.dot(gm * t) * nu;
    for (const Vec& s : fr.tangent) t -= s.dot(gm * t) * s;
    t /= std::sqrt(t.dot(gm * t));
    fr.tangent.push_back(t);
  }
  return fr;
}

BoundaryFrame boundary_frame(const ChartGeometry& g, const Vec& z) {
  return level_frame(g, z, boundary_gradient(g, z));
}

double second_fundamental_form(const ChartGeometry& g, const BoundaryFrame& frame, const Vec& v) {
  const Vec& z = frame.z;
  double r = g.boundary_fn(z);
  if (std::abs(r) > 1e-8) {
    std::ostringstream os;
    os << "|rho| = " << std::abs(r) << " > 1e-8";
    throw Error(ErrorCode::NotOnBoundary, os.str());
  }
  Vec dr = boundary_gradient(g, z);
  Mat H = boundary_hessian(g, z);
  Christoffel G = christoffel(g, z);
  // d^2/dt^2 rho(sigma) = H(v,v) - drho(Gamma(v,v))
  double acc = v.dot(H * v) - dr.dot(G.contract(v, v));
  double len = std::sqrt(dr.dot(metric_inverse(g, z) * dr));
  return -acc / len;
}

Vec project_to_boundary(const ChartGeometry& g, const Vec& z0) {
  Vec z = z0;
  for (int it = 0; it < 60; ++it) {
    double r = g.boundary_fn(z);
    if (std::abs(r) < 1e-15) break;
    Vec d = boundary_gradient(g, z);
    z -= r * d / d.squaredNorm();
  }
  return z;
}

// ---- builders ----

ChartGeometry euclidean_geometry(int n) {
  ChartGeometry g;
  g.dim = n;
  g.metric = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  g.metric_derivs = [n](const Vec&) { return MetricDerivs(n, Mat::Zero(n, n)); };
  g.flat_metric = true;
  set_field_zero(g);
  g.boundary_fn = [](const Vec&) { return 1.0; };
  g.boundary_grad = [n](const Vec&) { return Vec(Vec::Zero(n)); };
  g.boundary_hess = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
  g.bbox_lo = Vec::Constant(n, -1.0);
  g.bbox_hi = Vec::Constant(n, 1.0);
  g.description = "euclidean";
  return g;
}

void set_metric_conformal(ChartGeometry& g, const Expr& c) {
  const int n = g.dim;
  g.metric = [n, c](const Vec& z) {
    double s = c(z);
    return Mat(Mat::Identity(n, n) * (s * s));
  };
  g.metric_derivs = [n, c](const Vec& z) {
    double s = c(z);
    Vec dc = fd_gradient([&c](const Vec& w) { return c(w); }, z);
    MetricDerivs dg(n);
    for (int k = 0; k < n; ++k) dg[k] = Mat::Identity(n, n) * (2.0 * s * dc[k]);
    return dg;
  };
  g.flat_metric = false;
}

void set_metric_radial_speed(ChartGeometry& g, const Expr& c) {
  const int n = g.dim;
  g.metric = [n, c](const Vec& z) {
    double s = c(z);
    return Mat(Mat::Identity(n, n) / (s * s));
  };
  g.metric_derivs = [n, c](const Vec& z) {
    double s = c(z);
    Vec dc = fd_gradient([&c](const Vec& w) { return c(w); }, z);
    MetricDerivs dg(n);
    for (int k = 0; k < n; ++k) dg[k] = Mat::Identity(n, n) * (-2.0 * dc[k] / (s * s * s));
    return dg;
  };
  g.flat_metric = false;
}

void set_field_zero(ChartGeometry& g) {
  const int n = g.dim;
  g.magnetic = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
  g.zero_field = true;
}

void set_field_constant(ChartGeometry& g, double B) {
  const int n = g.dim;
  Mat om = Mat::Zero(n, n);
  om(0, 1) = B;
  om(1, 0) = -B;
  g.magnetic = [om](const Vec&) { return om; };
  g.zero_field = (B == 0.0);
}

void set_field_potential(ChartGeometry& g, const std::vector<Expr>& A) {
  const int n = g.dim;
  if (static_cast<int>(A.size()) != n)
    throw ValidationError("magnetic", "potential needs " + std::to_string(n) + " components");
  g.magnetic = [n, A](const Vec& z) {
    Mat dA(n, n);  // dA(k, j) = d_k A_j
    Vec zp = z, zm = z;
    for (int k = 0; k < n; ++k) {
      double h = metric_fd_step(z[k]);
      zp[k] = z[k] + h;
      zm[k] = z[k] - h;
      for (int j = 0; j < n; ++j) dA(k, j) = (A[j](zp) - A[j](zm)) / (2.0 * h);
      zp[k] = zm[k] = z[k];
    }
    Mat om = dA - dA.transpose();  // Omega_ij = d_i A_j - d_j A_i
    return om;
  };
  g.zero_field = false;
}

void set_boundary_ball(ChartGeometry& g, double r) {
  const int n = g.dim;
  g.boundary_fn = [r](const Vec& z) { return (r * r - z.squaredNorm()) / (2.0 * r); };
  g.boundary_grad = [r](const Vec& z) { return Vec(-z / r); };
  g.boundary_hess = [n, r](const Vec&) { return Mat(-Mat::Identity(n, n) / r); };
  g.bbox_lo = Vec::Constant(n, -1.1 * r);
  g.bbox_hi = Vec::Constant(n, 1.1 * r);
}

void set_boundary_halfspace(ChartGeometry& g) {
  const int n = g.dim;
  g.boundary_fn = [](const Vec& z) { return z[0]; };
  g.boundary_grad = [n](const Vec&) { return Vec(Vec::Unit(n, 0)); };
  g.boundary_hess = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
}

void set_boundary_expression(ChartGeometry& g, const Expr& rho) {
  g.boundary_fn = [rho](const Vec& z) { return rho(z); };
  g.boundary_grad.reset();
  g.boundary_hess.reset();
}

}  // namespace magtomo
