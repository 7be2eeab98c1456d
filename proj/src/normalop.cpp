#include "magtomo/normalop.hpp"

#include "magtomo/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <numbers>

namespace magtomo {

using cd = std::complex<double>;

// ---- cutoff ----

double Cutoff::operator()(double s) const {
  const double a = std::abs(s);
  const double r0 = 3.0 * std::sqrt(mu), r1 = 4.0 * std::sqrt(mu);
  if (a >= r1) return 0.0;
  const double gauss = std::exp(-s * s / (2.0 * mu));
  if (a <= r0) return gauss;
  auto psi = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
  const double t = (a - r0) / (r1 - r0);
  return gauss * psi(1.0 - t) / (psi(1.0 - t) + psi(t));
}

double Cutoff::l1_norm() const {
  const double r0 = 3.0 * std::sqrt(mu), r1 = support();
  std::vector<double> xs, ws;
  double total = 0.0;
  for (auto [a, b] : {std::pair{-r0, r0}, std::pair{r0, r1}}) {
    gauss_legendre(200, a, b, xs, ws);
    for (std::size_t i = 0; i < xs.size(); ++i) total += (a < 0 ? 1.0 : 2.0) * ws[i] * (*this)(xs[i]);
  }
  return total;
}

// ---- quadrature ----

void gauss_legendre(int m, double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(m, 0.0);
  weights.assign(m, 0.0);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= m; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = m * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    nodes[i] = c - h * x;
    nodes[m - 1 - i] = c + h * x;
    weights[i] = weights[m - 1 - i] = h * w;
  }
}

double sphere_area(int ambient_dim) {
  const double d = ambient_dim;
  return 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
}

SphereRule sphere_rule(int ambient_dim, int order) {
  SphereRule r;
  if (ambient_dim == 1) {
    r.points = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    r.weights = {1.0, 1.0};
    return r;
  }
  if (ambient_dim == 2) {
    const int m = std::max(order, 4);
    for (int k = 0; k < m; ++k) {
      double a = 2.0 * std::numbers::pi * (k + 0.5) / m;
      Vec p(2);
      p << std::cos(a), std::sin(a);
      r.points.push_back(p);
      r.weights.push_back(2.0 * std::numbers::pi / m);
    }
    return r;
  }
  // first coordinate t = cos(theta); remaining on a scaled lower sphere
  SphereRule sub = sphere_rule(ambient_dim - 1, order);
  std::vector<double> ts, wt;
  gauss_legendre(std::max(order / 2, 4), -1.0, 1.0, ts, wt);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double s = std::sqrt(1.0 - ts[i] * ts[i]);
    const double jac = std::pow(s, ambient_dim - 3);
    for (std::size_t j = 0; j < sub.points.size(); ++j) {
      Vec p(ambient_dim);
      p[0] = ts[i];
      p.tail(ambient_dim - 1) = s * sub.points[j];
      r.points.push_back(p);
      r.weights.push_back(wt[i] * jac * sub.weights[j]);
    }
  }
  return r;
}

// ---- J averages ----

ScatteringFrame scattering_frame(const ChartGeometry& g, const LocalChart& chart, double x, const Vec& y) {
  auto z = chart.point(x, y);
  if (!z) throw Error(ErrorCode::LeftChart, "(x, y) does not map into the chart");
  const int n = g.dim;
  Mat cf = chart.coframe(*z);
  Mat J = cf.inverse();  // columns: d z / d(x, y_k)
  Mat gxy = J.transpose() * g.metric(*z) * J;
  ScatteringFrame fr;
  fr.x = x;
  fr.h = gxy.bottomRightCorner(n - 1, n - 1);
  return fr;
}

Vec j_average(int order, const std::function<double(double, const Vec&)>& v, const Cutoff& chi,
              const ScatteringFrame& frame, int n_s, int n_omega) {
  const int n = static_cast<int>(frame.h.rows()) + 1;
  const double x = frame.x;
  std::vector<double> ss, ws;
  gauss_legendre(n_s, -chi.support(), chi.support(), ss, ws);
  SphereRule om = sphere_rule(n - 1, n_omega);
  const int size = order == 0 ? 1 : (order == 1 ? n : sym_size(n));
  Vec out = Vec::Zero(size);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const double lam = x * ss[i];
    const double cw = chi(ss[i]) * ws[i] * x;  // d lambda = x ds
    if (cw == 0.0) continue;
    for (std::size_t j = 0; j < om.points.size(); ++j) {
      const Vec& w = om.points[j];
      const double val = v(lam, w) * cw * om.weights[j];
      if (order == 0) {
        out[0] += val;
        continue;
      }
      Vec cov(n);  // g_sc(lambda d_x + omega d_y)
      cov[0] = lam / std::pow(x, 4);
      cov.tail(n - 1) = frame.h * w / (x * x);
      if (order == 1) out += val * cov;
      else out += val * sym_pack(cov * cov.transpose());
    }
  }
  return order == 2 ? out : out / (x * x);
}

// ---- alpha ----

AlphaModel AlphaModel::isotropic(int m, double value) {
  AlphaModel a;
  a.plus = value * Mat::Identity(m, m);
  a.minus = Vec::Zero(m);
  return a;
}

AlphaModel fit_alpha(const ChartGeometry& g, const LocalChart& chart, double x, const Vec& y, int n_omega) {
  const int m = g.dim - 1;
  const int q = sym_size(m);
  auto dirs = sphere_directions(m, n_omega);
  Mat Aq(dirs.size(), q);
  Mat Al(dirs.size(), m);
  Vec even(dirs.size()), odd(dirs.size());
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const Vec& w = dirs[k];
    double ap = alpha(g, chart, {x, y, 0.0, w, chart.c, chart.eps});
    double am = alpha(g, chart, {x, y, 0.0, Vec(-w), chart.c, chart.eps});
    even[k] = 0.5 * (ap + am);
    odd[k] = 0.5 * (ap - am);
    int c = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j, ++c) Aq(k, c) = (i == j ? 1.0 : 2.0) * w[i] * w[j];
    Al.row(k) = w.transpose();
  }
  AlphaModel out;
  out.plus = sym_unpack(m, Aq.colPivHouseholderQr().solve(even));
  out.minus = Al.colPivHouseholderQr().solve(odd);
  return out;
}

Vec default_b(const ChartGeometry& g, const LocalChart& chart) {
  const int m = g.dim - 1;
  Vec b(m);
  Vec gx = chart.grad_x(chart.p);
  for (int k = 0; k < m; ++k) b[k] = -gx.dot(lorentz(g, chart.p, chart.e[k]));
  return b;
}

SymbolParams SymbolParams::defaults(Kind kind, int dim, double F) {
  SymbolParams p;
  p.kind = kind;
  p.dim = dim;
  p.F = F;
  p.alpha = AlphaModel::isotropic(dim - 1);
  p.a = Mat::Zero(dim - 1, dim - 1);
  p.b = Vec::Zero(dim - 1);
  return p;
}

// ---- symbols ----

int symbol_field_size(Kind kind, int n) {
  if (kind == Kind::BF) return n + 1;
  return 1 + (n - 1) + sym_size(n - 1) + 1 + (n - 1);
}

int symbol_potential_size(Kind kind, int n) { return kind == Kind::BF ? 1 : n + 1; }

namespace {

// Packed y-tensor weights of the tensor inner product.
Vec sym_gram(int m) {
  Vec G(sym_size(m));
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) G[sym_index(m, i, j)] = i == j ? 1.0 : 2.0;
  return G;
}

struct HBLayout {
  int m, S, hxy, hyy, bx, by, N;
  explicit HBLayout(int n) : m(n - 1), S(sym_size(n - 1)) {
    hxy = 1;
    hyy = 1 + m;
    bx = hyy + S;
    by = bx + 1;
    N = by + m;
  }
};

Vec field_gram(Kind kind, int n) {
  if (kind == Kind::BF) return Vec::Ones(n + 1);
  HBLayout L(n);
  Vec G = Vec::Ones(L.N);
  G.segment(L.hxy, L.m).setConstant(2.0);
  G.segment(L.hyy, L.S) = sym_gram(L.m);
  return G;
}

}  // namespace

CMat symbol_gauge(const SymbolParams& prm, Side side, double xi, const Vec& eta) {
  const int n = prm.dim;
  const cd z(xi, prm.F);
  CMat D;
  if (prm.kind == Kind::BF) {
    D = CMat::Zero(n + 1, 1);
    D(0, 0) = z;
    for (int k = 0; k < n - 1; ++k) D(1 + k, 0) = eta[k];
  } else {
    HBLayout L(n);
    const int m = L.m;
    D = CMat::Zero(L.N, n + 1);  // columns: u_x, u_y (m), p
    D(0, 0) = z;
    for (int k = 0; k < m; ++k) {
      D(L.hxy + k, 0) = 0.5 * eta[k];
      D(L.hxy + k, 1 + k) = 0.5 * z;
    }
    for (int k = 0; k < m; ++k)
      for (int l = k; l < m; ++l) {
        const int r = L.hyy + sym_index(m, k, l);
        D(r, 0) = prm.a(k, l);
        if (k == l) {
          D(r, 1 + k) += eta[k];
        } else {
          D(r, 1 + l) += 0.5 * eta[k];
          D(r, 1 + k) += 0.5 * eta[l];
        }
      }
    D(L.bx, n) = z;
    for (int k = 0; k < m; ++k) {
      D(L.by + k, 0) = prm.b[k];
      D(L.by + k, n) = eta[k];
    }
  }
  if (side == Side::D) return D;
  return D.adjoint() * field_gram(prm.kind, n).cast<cd>().asDiagonal();
}

CMat sc_symbol(const SymbolParams& prm, double xi, const Vec& eta, const SphereRule& rule) {
  const int n = prm.dim;
  const int N = symbol_field_size(prm.kind, n);
  const double r2 = xi * xi + prm.F * prm.F;
  const cd zc(xi, -prm.F);
  CMat S = CMat::Zero(N, N);
  CVec L(N);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Vec& Yh = rule.points[q];
    const double ye = Yh.dot(eta);
    const double al = prm.alpha(Yh);
    const double mu = std::max(al, 1e-300) / prm.F;
    const double w = rule.weights[q] * std::exp(-ye * ye / (2.0 * mu * r2)) / std::sqrt(r2);
    if (w == 0.0) continue;
    const cd th1 = -zc * ye / r2;
    if (prm.kind == Kind::BF) {
      L[0] = th1;
      for (int k = 0; k < n - 1; ++k) L[1 + k] = Yh[k];
      L[n] = 1.0;
    } else {
      HBLayout H(n);
      const cd th2 = th1 * th1 + cd(0.0, 2.0) * al * zc / r2;
      L[0] = th2;
      for (int k = 0; k < H.m; ++k) {
        L[H.hxy + k] = 2.0 * th1 * Yh[k];
        L[H.by + k] = Yh[k];
      }
      for (int k = 0; k < H.m; ++k)
        for (int l = k; l < H.m; ++l) L[H.hyy + sym_index(H.m, k, l)] = (k == l ? 1.0 : 2.0) * Yh[k] * Yh[l];
      L[H.bx] = th1;
    }
    S.noalias() += w * (L.conjugate() * L.transpose());
  }
  return S;
}

namespace {

Vec infinity_w(Kind kind, double s, const Vec& Yh) {
  const int m = static_cast<int>(Yh.size());
  const int n = m + 1;
  Vec w(symbol_field_size(kind, n));
  if (kind == Kind::BF) {
    w << s, Yh, 1.0;
    return w;
  }
  HBLayout H(n);
  w[0] = s * s;
  for (int k = 0; k < m; ++k) {
    w[H.hxy + k] = 2.0 * s * Yh[k];
    w[H.by + k] = Yh[k];
  }
  for (int k = 0; k < m; ++k)
    for (int l = k; l < m; ++l) w[H.hyy + sym_index(m, k, l)] = (k == l ? 1.0 : 2.0) * Yh[k] * Yh[l];
  w[H.bx] = s;
  return w;
}

// Orthonormal basis of the orthogonal complement of unit vector u in R^m (columns).
Mat complement_basis(const Vec& u) {
  const int m = static_cast<int>(u.size());
  Eigen::HouseholderQR<Mat> qr(u);
  Mat Q = qr.householderQ() * Mat::Identity(m, m);
  return Q.rightCols(m - 1);
}

}  // namespace

Mat infinity_symbol(Kind kind, int n, double xi_in, const Vec& eta_in, const Cutoff& chi, int order) {
  const double zn = std::sqrt(xi_in * xi_in + eta_in.squaredNorm());
  const double xi = xi_in / zn;
  const Vec eta = eta_in / zn;
  const double ne = eta.norm();
  const int m = n - 1;
  const int N = symbol_field_size(kind, n);
  const double sup = chi.support();
  Mat S = Mat::Zero(N, N);
  auto add = [&](double s, const Vec& Yh, double w) {
    const double c = chi(s);
    if (c == 0.0 || w == 0.0) return;
    Vec v = infinity_w(kind, s, Yh);
    S.noalias() += (c * w) * (v * v.transpose());
  };
  if (std::abs(xi) >= ne) {
    // graph over the full sphere: S = -eta.Yh / xi
    SphereRule rule = sphere_rule(m, order);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec& Yh = rule.points[q];
      const double ye = eta.dot(Yh);
      const double tan2 = eta.squaredNorm() - ye * ye;
      add(-ye / xi, Yh, rule.weights[q] * std::sqrt(1.0 + tan2 / (xi * xi)));
    }
  } else {
    const Vec eh = eta / ne;
    Mat perp = complement_basis(eh);
    SphereRule sub = sphere_rule(m - 1, order);
    std::vector<double> ts, wt;
    if (std::abs(xi) < 1e-12) {
      gauss_legendre(2 * order, -sup, sup, ts, wt);
      for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = 0; j < sub.points.size(); ++j) add(ts[i], perp * sub.points[j], wt[i] * sub.weights[j]);
    } else {
      const double c0 = std::min(1.0, sup * std::abs(xi) / ne);
      const double psi0 = std::acos(c0);
      gauss_legendre(2 * order, psi0, std::numbers::pi - psi0, ts, wt);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const double cp = std::cos(ts[i]), sp = std::sin(ts[i]);
        const double meas = std::sqrt(xi * xi + ne * ne * sp * sp) / std::abs(xi) * std::pow(sp, m - 2);
        const double s = -ne * cp / xi;
        for (std::size_t j = 0; j < sub.points.size(); ++j)
          add(s, Vec(cp * eh + sp * (perp * sub.points[j])), wt[i] * meas * sub.weights[j]);
      }
    }
  }
  return S / zn;
}

CMat kernel_basis(const CMat& delta, double tol) {
  const int N = static_cast<int>(delta.cols());
  Eigen::JacobiSVD<CMat> svd(delta, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * std::max(smax, 1.0)) ++rank;
  return svd.matrixV().rightCols(N - rank);
}

// ---- scans ----

namespace {

struct Freq {
  double xi;
  Vec eta;
};

std::vector<Freq> frequencies(int n, const FreqGrid& grid, ScanMode mode) {
  std::vector<Freq> out;
  const int m = n - 1;
  if (mode == ScanMode::Infinity) {
    for (const Vec& d : sphere_directions(n, grid.n_inf, 3)) out.push_back({d[0], d.tail(m)});
    return out;
  }
  auto lin = [](int k, double a, double b) {
    std::vector<double> v;
    for (int i = 0; i < k; ++i) v.push_back(k == 1 ? 0.0 : a + (b - a) * i / (k - 1));
    return v;
  };
  auto xs = lin(grid.n_xi, -grid.xi_max, grid.xi_max);
  auto es = lin(grid.n_eta, -grid.eta_max, grid.eta_max);
  std::size_t ne = 1;
  for (int k = 0; k < m; ++k) ne *= es.size();
  for (double xi : xs)
    for (std::size_t idx = 0; idx < ne; ++idx) {
      Vec eta(m);
      std::size_t r = idx;
      for (int k = m - 1; k >= 0; --k) {
        eta[k] = es[r % es.size()];
        r /= es.size();
      }
      out.push_back({xi, eta});
    }
  return out;
}

double min_eig(const CMat& H) {
  if (H.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace

ScanReport ellipticity_scan(const SymbolParams& prm, const FreqGrid& grid, ScanMode mode, bool restricted) {
  if (!(prm.F > 0.0) && mode == ScanMode::Finite) throw ValidationError("F", "must be positive");
  const int n = prm.dim;
  auto freqs = frequencies(n, grid, mode);
  SphereRule rule = sphere_rule(n - 1, grid.sphere_order);
  // infinity mode uses the cutoff width of the mean alpha
  double amean = 0.0, wsum = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    amean += rule.weights[q] * prm.alpha(rule.points[q]);
    wsum += rule.weights[q];
  }
  Cutoff chi{std::max(amean / wsum, 1e-12) / std::max(prm.F, 1e-12)};
  SymbolParams std_prm = prm;
  std_prm.F = 0.0;
  std_prm.a.setZero();
  std_prm.b.setZero();

  std::vector<double> mins(freqs.size());
  std::vector<int> kdims(freqs.size());
  parallel_for(freqs.size(), [&](std::size_t i) {
    const Freq& f = freqs[i];
    CMat S;
    CMat delta;
    if (mode == ScanMode::Finite) {
      S = sc_symbol(prm, f.xi, f.eta, rule);
      delta = symbol_gauge(prm, Side::Delta, f.xi, f.eta);
    } else {
      S = infinity_symbol(prm.kind, n, f.xi, f.eta, chi, grid.sphere_order).cast<cd>();
      delta = symbol_gauge(std_prm, Side::Delta, f.xi, f.eta);
    }
    if (!restricted) {
      mins[i] = min_eig(S);
      kdims[i] = static_cast<int>(S.rows());
      return;
    }
    CMat Q = kernel_basis(delta);
    kdims[i] = static_cast<int>(Q.cols());
    mins[i] = Q.cols() ? min_eig(Q.adjoint() * S * Q) : 0.0;
  });
  ScanReport rep;
  rep.frequencies = freqs.size();
  rep.min_eig = 1e300;
  rep.kernel_dim_min = 1 << 30;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (kdims[i] == 0) rep.empty_kernel = true;
    rep.kernel_dim_min = std::min(rep.kernel_dim_min, kdims[i]);
    rep.kernel_dim_max = std::max(rep.kernel_dim_max, kdims[i]);
    if (mins[i] < rep.min_eig) {
      rep.min_eig = mins[i];
      rep.argmin_xi = freqs[i].xi;
      rep.argmin_eta = freqs[i].eta;
    }
  }
  rep.positive = rep.min_eig > 1e-10 && !rep.empty_kernel;
  return rep;
}

double find_F0(const SymbolParams& prm_in, const FreqGrid& grid, ScanReport* report) {
  SymbolParams prm = prm_in;
  auto positive_at = [&](double F) {
    prm.F = F;
    return ellipticity_scan(prm, grid, ScanMode::Finite).positive;
  };
  double hi = 1.0;
  while (!positive_at(hi)) {
    hi *= 2.0;
    if (hi > 65536.0) throw Error(ErrorCode::NotFound, "no positive restricted scan for F <= 2^16");
  }
  double lo = hi > 1.0 ? 0.5 * hi : 0.0;
  while (hi - lo > 0.01 * hi && hi > 0.01) {
    const double mid = 0.5 * (lo + hi);
    if (positive_at(mid)) hi = mid;
    else lo = mid;
  }
  if (report) {
    prm.F = hi;
    *report = ellipticity_scan(prm, grid, ScanMode::Finite);
  }
  return hi;
}

// ---- front-face kernels ----

Mat front_face_kernel(Kind kind, double X, const Vec& Y, double F, const Cutoff& chi, const AlphaModel& alpha,
                      bool bracket_only) {
  const int m = static_cast<int>(Y.size());
  const int n = m + 1;
  const double r = Y.norm();
  if (!(r > 0.0)) throw ValidationError("Y", "|Y| must be positive");
  const Vec Yh = Y / r;
  const double ap = alpha(Yh), am = alpha(Vec(-Yh));
  const double Sp = (X - ap * r * r) / r;
  const double Sm = (X + am * r * r) / r;
  auto branch = [&](double S, double S01, bool minus) {
    Vec a10(n), a01(n);
    a10 << S, Yh;
    a01 << S01, Yh;
    Vec out, in;
    int split;
    if (kind == Kind::BF) {
      out.resize(n + 1);
      in.resize(n + 1);
      out << a10, 1.0;
      in << a01, 1.0;
      split = n;
    } else {
      const int q = sym_size(n);
      out.resize(q + n);
      in.resize(q + n);
      Mat oo = a10 * a10.transpose();
      Mat ii = a01 * a01.transpose();
      out << sym_pack(oo), a10;
      Vec ip = sym_pack(ii);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) ip[sym_index(n, i, j)] *= 2.0;
      in << ip, a01;
      split = q;
    }
    Mat M = out * in.transpose();
    if (minus) {
      M.topRightCorner(split, M.cols() - split) *= -1.0;
      M.bottomLeftCorner(M.rows() - split, split) *= -1.0;
    }
    return M;
  };
  Mat K = chi(Sp) * branch(Sp, Sp + 2.0 * ap * r, false) + chi(-Sm) * branch(Sm, Sm - 2.0 * am * r, true);
  if (bracket_only) return K;
  return std::exp(-F * X) * std::pow(r, 1 - n) * K;
}

// ---- assembled normal operator ----

NormalOperator assemble_normal(const LayerSpace& space, const Family& family, const Cutoff& chi) {
  const ChartGeometry& g = *space.geo;
  const int n = space.dim;
  NormalOperator op;
  op.kind = space.kind;
  op.rays = rays_from_family(family);
  space.weight.check();
  op.T = forward_matrix(space, op.rays);
  const int first = space.kind == Kind::BF ? n : sym_size(n);
  const int second = space.kind == Kind::BF ? 1 : n;
  op.out_comps = first + second;

  // trapezoid weights in s, uniform weights on the omega sphere
  const std::size_t ns = family.ss.size();
  std::vector<double> ds(ns, 1.0);
  if (ns > 1) {
    const double h = (family.ss.back() - family.ss.front()) / static_cast<double>(ns - 1);
    for (std::size_t i = 0; i < ns; ++i) ds[i] = (i == 0 || i + 1 == ns) ? 0.5 * h : h;
  }
  const double dw = sphere_area(n - 1) / static_cast<double>(family.omegas.size());

  const std::size_t nxy = family.xs.size() * family.ys.size();
  std::vector<ScatteringFrame> frames(nxy);
  op.base_xy.resize(nxy);
  for (std::size_t ix = 0; ix < family.xs.size(); ++ix)
    for (std::size_t iy = 0; iy < family.ys.size(); ++iy) {
      const std::size_t k = ix * family.ys.size() + iy;
      frames[k] = scattering_frame(g, family.chart, family.xs[ix], family.ys[iy]);
      Vec xy(n);
      xy[0] = family.xs[ix];
      xy.tail(n - 1) = family.ys[iy];
      op.base_xy[k] = xy;
    }

  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t r = 0; r < family.entries.size(); ++r) {
    const FamilyEntry& e = family.entries[r];
    const std::size_t k = static_cast<std::size_t>(e.ix) * family.ys.size() + e.iy;
    const ScatteringFrame& fr = frames[k];
    const double x = fr.x;
    const double cw = chi(e.s) * ds[e.il] * x * dw;  // d lambda = x ds
    if (cw == 0.0) continue;
    Vec cov(n);
    cov[0] = e.param.lambda / std::pow(x, 4);
    cov.tail(n - 1) = fr.h * e.param.omega / (x * x);
    Vec row(op.out_comps);
    if (space.kind == Kind::BF) {
      row.head(n) = cov / (x * x);
      row[n] = 1.0 / x;  // x (from W^-1) times x^-2
    } else {
      row.head(first) = sym_pack(cov * cov.transpose());
      row.tail(n) = cov / x;
    }
    const int base = static_cast<int>(k) * op.out_comps;
    for (int c = 0; c < op.out_comps; ++c)
      if (row[c] != 0.0) t.emplace_back(base + c, static_cast<int>(r), cw * row[c]);
  }
  op.J.resize(static_cast<Eigen::Index>(nxy * op.out_comps), static_cast<Eigen::Index>(op.rays.size()));
  op.J.setFromTriplets(t.begin(), t.end());
  return op;
}

Vec NormalOperator::transform_rows(const TensorPair& f, double F) const {
  Vec d(static_cast<Eigen::Index>(rays.size()));
  parallel_for(rays.size(), [&](std::size_t r) {
    d[static_cast<Eigen::Index>(r)] = std::exp(-F / rays[r].x_base) * ray_transform(f, *rays[r].path);
  });
  return d;
}

Vec NormalOperator::apply_continuous(const TensorPair& f, double F) const { return J * transform_rows(f, F); }

}  // namespace magtomo
