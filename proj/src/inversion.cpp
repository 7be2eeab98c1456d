#include "magtomo/inversion.hpp"

#include "magtomo/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

namespace magtomo {

LinearMap jacobi(const Vec& diagonal) {
  Vec inv = diagonal.cwiseMax(1e-300).cwiseInverse();
  return [inv](const Vec& r) -> Vec { return r.cwiseProduct(inv); };
}

CgResult conjugate_gradient(const LinearMap& A, const Vec& b, const LinearMap& precond, double rel_tol,
                            int max_iter, const Vec& x0) {
  CgResult res;
  const double bnorm = b.norm();
  res.x = x0.size() ? x0 : Vec::Zero(b.size());
  if (bnorm == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  Vec r = b - (x0.size() ? A(res.x) : Vec::Zero(b.size()));
  Vec z = precond(r);
  Vec p = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    res.rel_residual = r.norm() / bnorm;
    if (res.rel_residual <= rel_tol) {
      res.converged = true;
      res.iterations = it;
      return res;
    }
    Vec Ap = A(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;  // loss of definiteness or exact breakdown
    const double a = rz / pAp;
    res.x += a * p;
    r -= a * Ap;
    z = precond(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    res.iterations = it + 1;
  }
  res.rel_residual = (b - A(res.x)).norm() / bnorm;
  res.converged = res.rel_residual <= rel_tol;
  return res;
}

namespace {

SpMat block_inverse(const SpMat& M, int block) {
  std::vector<Eigen::Triplet<double>> t;
  Mat dense = Mat::Zero(block, block);
  for (Eigen::Index b0 = 0; b0 < M.rows(); b0 += block) {
    dense.setZero();
    for (int i = 0; i < block; ++i)
      for (SpMat::InnerIterator it(M, b0 + i); it; ++it) dense(i, it.col() - b0) = it.value();
    Mat inv = dense.inverse();
    for (int i = 0; i < block; ++i)
      for (int j = 0; j < block; ++j)
        if (inv(i, j) != 0.0) t.emplace_back(static_cast<int>(b0 + i), static_cast<int>(b0 + j), inv(i, j));
  }
  SpMat out(M.rows(), M.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

// Smallest eigenvalue of diag(Mpot)^-1/2 K diag(Mpot)^-1/2 by Lanczos with full reorthogonalisation.
double lanczos_min(const SpMat& K, const Vec& scale, int steps) {
  const Eigen::Index n = K.rows();
  if (n == 0) return 0.0;
  steps = static_cast<int>(std::min<Eigen::Index>(steps, n));
  Vec s = scale.cwiseSqrt().cwiseInverse();
  auto op = [&](const Vec& v) -> Vec { return s.cwiseProduct(K * s.cwiseProduct(v)); };
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Mat Q(n, steps);
  Vec q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = nd(rng);
  q.normalize();
  std::vector<double> alpha, beta;
  for (int k = 0; k < steps; ++k) {
    Q.col(k) = q;
    Vec w = op(q);
    const double a = q.dot(w);
    alpha.push_back(a);
    w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
    w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
    const double b = w.norm();
    if (b < 1e-14 || k + 1 == steps) break;
    beta.push_back(b);
    q = w / b;
  }
  const int m = static_cast<int>(alpha.size());
  Mat Tm = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    Tm(i, i) = alpha[i];
    if (i + 1 < m) Tm(i, i + 1) = Tm(i + 1, i) = beta[i];
  }
  return Eigen::SelfAdjointEigenSolver<Mat>(Tm, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

}  // namespace

GaugeProjector::GaugeProjector(const LayerSpace& sp, double tol_) : space(&sp), tol(tol_) {
  SpMat MD = sp.M * sp.D;
  stiffness = SpMat(sp.D.transpose()) * MD;
  stiffness.prune(0.0);
  mpot_inv = block_inverse(sp.Mpot, sp.pcomp);
  min_ritz = lanczos_min(stiffness, sp.Mpot.diagonal(), 80);
}

Vec GaugeProjector::witten_solve(const Vec& rhs, int* iterations) const {
  // delta_F d_F p = rhs  <=>  (D^T M D) p = Mpot rhs
  const Vec b = space->Mpot * rhs;
  const int N = static_cast<int>(b.size());
  CgResult r = conjugate_gradient([this](const Vec& v) -> Vec { return stiffness * v; }, b,
                                  jacobi(stiffness.diagonal()), tol, 10 * std::max(N, 1));
  if (iterations) *iterations = r.iterations;
  if (!r.converged) {
    std::ostringstream os;
    os << "Witten Laplacian CG stopped at relative residual " << r.rel_residual << " after " << r.iterations
       << " iterations";
    throw Error(ErrorCode::NonConvergence, os.str());
  }
  return r.x;
}

Split solenoidal_split(const GaugeProjector& proj, const Vec& c) {
  Split s;
  s.potential = proj.witten_solve(proj.delta(c));
  s.potential_part = proj.d(s.potential);
  s.solenoidal = c - s.potential_part;
  return s;
}

namespace {

double power_norm_sq(const SpMat& T) {
  if (T.rows() == 0 || T.cols() == 0) return 0.0;
  Vec v = Vec::Ones(T.cols()).normalized();
  double lam = 0.0;
  for (int k = 0; k < 60; ++k) {
    Vec w = T.transpose() * (T * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double prev = lam;
    lam = nw;
    v = w / nw;
    if (std::abs(lam - prev) <= 1e-6 * lam) break;
  }
  return lam;
}

}  // namespace

InversionResult invert_local(const LayerSpace& space, const GaugeProjector& proj, const std::vector<Ray>& rays,
                             const Vec& data, const Cutoff& chi, const InversionParams& prm, const Vec* truth) {
  if (static_cast<std::size_t>(data.size()) != rays.size())
    throw ValidationError("data", "one transform value per ray expected");
  Vec scale = Vec::Ones(static_cast<Eigen::Index>(rays.size()));
  if (prm.chi_row_weights)
    for (std::size_t r = 0; r < rays.size(); ++r) scale[static_cast<Eigen::Index>(r)] = chi(rays[r].s);
  const SpMat T = forward_matrix(space, rays, scale);
  Vec d(data.size());
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    d[i] = scale[i] * std::exp(-space.weight.F / rays[r].x_base) * data[i];
  }

  InversionResult out;
  out.reg = prm.reg >= 0.0 ? prm.reg : prm.reg_factor * power_norm_sq(T);
  const double reg = out.reg;
  const SpMat& M = space.M;
  const SpMat& D = space.D;
  // gauge penalty ||delta_F c||^2 in the potential mass norm: c^T M D Mpot^-1 D^T M c
  auto normal = [&](const Vec& c) -> Vec {
    Vec dc = proj.mpot_inv * (D.transpose() * (M * c));
    return T.transpose() * (T * c) + reg * (M * (D * dc)) + prm.ridge * reg * c;
  };
  const Vec rhs = T.transpose() * d;
  LinearMap precond;
  Eigen::LLT<Mat> llt;
  if (static_cast<std::size_t>(T.cols()) <= prm.dense_limit) {
    Eigen::SparseMatrix<double> Tc = T;
    Eigen::SparseMatrix<double> MD = Eigen::SparseMatrix<double>(M) * Eigen::SparseMatrix<double>(D);
    Mat K = Mat(Eigen::SparseMatrix<double>(Tc.transpose() * Tc));
    K += reg * Mat(Eigen::SparseMatrix<double>(MD * Eigen::SparseMatrix<double>(proj.mpot_inv) *
                                               Eigen::SparseMatrix<double>(MD.transpose())));
    K.diagonal().array() += prm.ridge * reg;
    llt.compute(K);
    if (llt.info() == Eigen::Success) precond = [&llt](const Vec& r) -> Vec { return llt.solve(r); };
  }
  if (!precond) {
    Vec diag = Vec::Zero(T.cols());
    for (Eigen::Index r = 0; r < T.outerSize(); ++r)
      for (SpMat::InnerIterator it(T, r); it; ++it) diag[it.col()] += it.value() * it.value();
    diag.array() += prm.ridge * reg;
    precond = jacobi(diag);
  }
  CgResult cg = conjugate_gradient(normal, rhs, precond, prm.cg_tol, prm.max_iter);
  out.coeffs = cg.x;
  out.iterations = cg.iterations;
  out.cg_residual = cg.rel_residual;
  out.ill_posed = cg.rel_residual > prm.ill_posed_residual;
  const double dn = d.norm();
  out.residual = dn > 0.0 ? (T * cg.x - d).norm() / dn : (T * cg.x).norm();

  Split s = solenoidal_split(proj, out.coeffs);
  out.solenoidal = s.solenoidal;
  const double sn = space.norm(out.solenoidal);
  const Vec ds = proj.delta(out.solenoidal);
  const double dsn = std::sqrt(std::max(0.0, ds.dot(space.Mpot * ds)));
  out.gauge_residual = sn > 0.0 ? dsn / sn : dsn;

  if (truth) {
    Split st = solenoidal_split(proj, *truth);
    const double tn = space.norm(st.solenoidal);
    const double en = space.norm(out.solenoidal - st.solenoidal);
    out.relative_error = tn > 0.0 ? en / tn : en;
    out.stability_ratio = dn > 0.0 ? en / dn : en;
  }
  return out;
}

double transport_solution(const ChartGeometry& g, const TensorPair& f, const Vec& z, const Vec& v, double t_max) {
  StepControl ctl;
  ctl.tol = 1e-11;
  GeodesicPath path = integrate(g, {z, v}, 0.0, t_max, ctl);
  if (path.trapped_flag || !path.exit_exit) {
    std::ostringstream os;
    os << "forward orbit does not exit within t = " << t_max;
    throw Error(ErrorCode::TrappedOrbit, os.str());
  }
  path.exit_entry = 0.0;
  return ray_transform(f, path);
}

}  // namespace magtomo
