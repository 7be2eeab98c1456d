#include "magtomo/discretization.hpp"

#include "magtomo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace magtomo {

ConjugationWeight ConjugationWeight::from_chart(const LocalChart& chart, double F, double x_min) {
  ConjugationWeight w;
  w.F = F;
  w.x_min = x_min;
  w.x = [chart](const Vec& z) { return chart.x_of(z); };
  w.grad_x = [chart](const Vec& z) { return chart.grad_x(z); };
  return w;
}

void ConjugationWeight::check() const {
  if (F < 0.0) throw ValidationError("F", "must be non-negative");
  if (!(x_min > 0.0)) throw ValidationError("x_min", "must be positive");
  if (F / x_min > 700.0) {
    std::ostringstream os;
    os << "F / x_min = " << F / x_min << " exceeds 700";
    throw Error(ErrorCode::ConjugationOverflow, os.str());
  }
}

std::vector<Ray> rays_from_family(const Family& family) {
  std::vector<Ray> rays;
  rays.reserve(family.entries.size());
  for (const FamilyEntry& e : family.entries) rays.push_back({&e.path, e.param.x, e.s});
  return rays;
}

namespace {

// Packed Gram of symmetric 2-tensors under g^{-1} (x) g^{-1}.
Mat sym_gram(const Mat& ginv) {
  const int n = static_cast<int>(ginv.rows());
  Mat G = Mat::Zero(sym_size(n), sym_size(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) G(sym_index(n, i, j), sym_index(n, a, b)) += ginv(i, a) * ginv(j, b);
  return G;
}

void add_block(std::vector<Eigen::Triplet<double>>& t, std::size_t off, const Mat& B) {
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j)
      if (B(i, j) != 0.0) t.emplace_back(static_cast<int>(off + i), static_cast<int>(off + j), B(i, j));
}

}  // namespace

LayerSpace make_layer_space(Kind kind, const ChartGeometry& g, const Grid& grid, const ConjugationWeight& w,
                            const std::function<bool(std::size_t)>& keep) {
  w.check();
  LayerSpace sp;
  sp.kind = kind;
  sp.dim = grid.dim;
  sp.geo = &g;
  sp.grid = grid;
  sp.weight = w;
  const int n = grid.dim;
  sp.ncomp = kind == Kind::BF ? n + 1 : sym_size(n) + n;
  sp.pcomp = kind == Kind::BF ? 1 : n + 1;
  sp.field_slot.assign(grid.size(), -1);
  sp.pot_slot.assign(grid.size(), -1);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Vec z = grid.node(k);
    // nodes outside M only enter through interpolation near the boundary and are nearly invisible to I
    if (!keep(k) || !(w.x(z) > w.x_min) || !(g.boundary_fn(z) > 0.0)) continue;
    sp.field_slot[k] = static_cast<int>(sp.field_nodes.size());
    sp.field_nodes.push_back(k);
    if (!grid.on_edge(k)) {
      sp.pot_slot[k] = static_cast<int>(sp.pot_nodes.size());
      sp.pot_nodes.push_back(k);
    }
  }
  const double vol = grid.cell_volume();

  std::vector<Eigen::Triplet<double>> tm, tp, td;
  for (std::size_t f = 0; f < sp.field_nodes.size(); ++f) {
    Vec z = grid.node(sp.field_nodes[f]);
    Mat gm = g.metric(z);
    Mat ginv = gm.inverse();
    const double dv = vol * std::sqrt(gm.determinant());
    Mat B = Mat::Zero(sp.ncomp, sp.ncomp);
    if (kind == Kind::BF) {
      B.topLeftCorner(n, n) = ginv;
      B(n, n) = 1.0;
    } else {
      const int q = sym_size(n);
      B.topLeftCorner(q, q) = sym_gram(ginv);
      B.bottomRightCorner(n, n) = ginv;
    }
    add_block(tm, f * sp.ncomp, dv * B);
  }
  for (std::size_t p = 0; p < sp.pot_nodes.size(); ++p) {
    Vec z = grid.node(sp.pot_nodes[p]);
    Mat gm = g.metric(z);
    const double dv = vol * std::sqrt(gm.determinant());
    Mat B = Mat::Zero(sp.pcomp, sp.pcomp);
    if (kind == Kind::BF) {
      B(0, 0) = 1.0;
    } else {
      B.topLeftCorner(n, n) = gm.inverse();
      B(n, n) = 1.0;
    }
    add_block(tp, p * sp.pcomp, dv * B);
  }

  // conjugated gauge map, central differences (one-sided at the box edge)
  for (std::size_t f = 0; f < sp.field_nodes.size(); ++f) {
    const std::size_t k = sp.field_nodes[f];
    const Vec z = grid.node(k);
    const double x = w.x(z);
    const Vec gx = w.grad_x(z);
    const double F = w.F;
    const auto idx = grid.multi_index(k);
    // (pot node column offset, coefficient) for d/dz_a at node k
    auto deriv = [&](int a) {
      std::vector<std::pair<int, double>> out;
      const double h = grid.spacing(a);
      auto at = [&](int shift, double c) {
        auto j = idx;
        j[a] += shift;
        const int s = sp.pot_slot[grid.flat_index(j)];
        if (s >= 0) out.emplace_back(s, c);
      };
      if (idx[a] == 0) {
        at(1, 1.0 / h);
        at(0, -1.0 / h);
      } else if (idx[a] == grid.shape[a] - 1) {
        at(0, 1.0 / h);
        at(-1, -1.0 / h);
      } else {
        at(1, 0.5 / h);
        at(-1, -0.5 / h);
      }
      return out;
    };
    const int self = sp.pot_slot[k];
    const std::size_t row0 = f * sp.ncomp;
    auto put = [&](std::size_t row, int pnode, int pc, double v) {
      if (v != 0.0) td.emplace_back(static_cast<int>(row), pnode * sp.pcomp + pc, v);
    };
    if (kind == Kind::BF) {
      for (int i = 0; i < n; ++i) {
        for (auto [s, c] : deriv(i)) put(row0 + i, s, 0, c);
        if (self >= 0) put(row0 + i, self, 0, -F / (x * x) * gx[i]);
      }
      continue;
    }
    Christoffel G;
    if (!g.flat_metric) G = christoffel(g, z);
    Mat L = g.zero_field ? Mat::Zero(n, n) : lorentz_matrix(g, z);
    for (int i = 0; i < n; ++i) {
      auto di = deriv(i);
      for (int j = i; j < n; ++j) {
        const std::size_t row = row0 + sym_index(n, i, j);
        for (auto [s, c] : di) put(row, s, j, 0.5 * c);
        for (auto [s, c] : deriv(j)) put(row, s, i, 0.5 * c);
        if (self < 0) continue;
        for (int m = 0; m < n; ++m) {
          double coef = 0.0;
          if (!g.flat_metric) coef -= G(m, i, j);
          if (m == j) coef -= 0.5 * F / (x * x) * gx[i];
          if (m == i) coef -= 0.5 * F / (x * x) * gx[j];
          put(row, self, m, coef);
        }
      }
    }
    const std::size_t brow = row0 + sym_size(n);
    for (int i = 0; i < n; ++i) {
      for (auto [s, c] : deriv(i)) put(brow + i, s, n, c);
      if (self < 0) continue;
      for (int j = 0; j < n; ++j) put(brow + i, self, j, x * L(j, i));
      put(brow + i, self, n, -(F / (x * x) + 1.0 / x) * gx[i]);
    }
  }
  const int nf = static_cast<int>(sp.field_dofs()), np = static_cast<int>(sp.pot_dofs());
  sp.M.resize(nf, nf);
  sp.M.setFromTriplets(tm.begin(), tm.end());
  sp.Mpot.resize(np, np);
  sp.Mpot.setFromTriplets(tp.begin(), tp.end());
  sp.D.resize(nf, np);
  sp.D.setFromTriplets(td.begin(), td.end());
  return sp;
}

void LayerSpace::physical(const Vec& c, const Vec& z, Vec& first, Vec& second) const {
  const int n = dim;
  const int q = kind == Kind::BF ? n : sym_size(n);
  first = Vec::Zero(q);
  second = Vec::Zero(ncomp - q);
  const double x = weight.x(z);
  if (!(x > 0.0) || weight.F / x > 700.0) return;
  auto st = grid.stencil(z);
  for (int m = 0; m < st.count; ++m) {
    const int s = field_slot[st.node[m]];
    if (s < 0) continue;
    first += st.weight[m] * c.segment(static_cast<Eigen::Index>(s) * ncomp, q);
    second += st.weight[m] * c.segment(static_cast<Eigen::Index>(s) * ncomp + q, ncomp - q);
  }
  const double e = std::exp(weight.F / x);
  first *= e;
  second *= e / x;
}

double LayerSpace::evaluate(const Vec& c, const Vec& z, const Vec& v) const {
  Vec a, b;
  physical(c, z, a, b);
  if (kind == Kind::BF) return a.dot(v) + b[0];
  return sym_quadratic(dim, a, v) + b.dot(v);
}

Integrand LayerSpace::integrand(const Vec& c) const {
  return [this, c](const Vec& z, const Vec& v) { return evaluate(c, z, v); };
}

Vec LayerSpace::sample(const VecFn& first, const VecFn& second) const {
  Vec c = Vec::Zero(static_cast<Eigen::Index>(field_dofs()));
  const int q = kind == Kind::BF ? dim : sym_size(dim);
  for (std::size_t f = 0; f < field_nodes.size(); ++f) {
    Vec z = grid.node(field_nodes[f]);
    c.segment(static_cast<Eigen::Index>(f) * ncomp, q) = first(z);
    c.segment(static_cast<Eigen::Index>(f) * ncomp + q, ncomp - q) = second(z);
  }
  return c;
}

Vec LayerSpace::conjugate(const TensorPair& fp) const {
  const ConjugationWeight& w = weight;
  return sample(
      [&](const Vec& z) -> Vec { return std::exp(-w.F / w.x(z)) * fp.first(z); },
      [&](const Vec& z) -> Vec { return w.x(z) * std::exp(-w.F / w.x(z)) * fp.second(z); });
}

std::vector<char> touched_nodes(const Grid& grid, const std::vector<Ray>& rays) {
  std::vector<char> hit(grid.size(), 0);
  for (const Ray& r : rays)
    for (const QuadNode& q : path_quadrature(*r.path)) {
      auto st = grid.stencil(q.z);
      for (int m = 0; m < st.count; ++m) hit[st.node[m]] = 1;
    }
  return hit;
}

SpMat forward_matrix(const LayerSpace& sp, const std::vector<Ray>& rays, const Vec& row_scale) {
  const int n = sp.dim;
  const std::size_t nd = sp.field_dofs();
  std::vector<std::vector<std::pair<int, double>>> rows(rays.size());
  parallel_for(rays.size(), [&](std::size_t r) {
    thread_local std::vector<double> acc;
    thread_local std::vector<int> used;
    if (acc.size() != nd) acc.assign(nd, 0.0);
    used.clear();
    const double scale = row_scale.size() ? row_scale[static_cast<Eigen::Index>(r)] : 1.0;
    if (scale == 0.0) return;
    const double F = sp.weight.F;
    const double xb = rays[r].x_base;
    Vec pair(sp.ncomp);
    for (const QuadNode& node : path_quadrature(*rays[r].path)) {
      const double x = sp.weight.x(node.z);
      if (!(x > 0.0) || F / x > 700.0) continue;
      const double fac = scale * node.w * std::exp(F * (1.0 / x - 1.0 / xb));
      const Vec& v = node.v;
      if (sp.kind == Kind::BF) {
        pair.head(n) = v;
        pair[n] = 1.0 / x;
      } else {
        int c = 0;
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j, ++c) pair[c] = (i == j ? 1.0 : 2.0) * v[i] * v[j];
        pair.tail(n) = v / x;
      }
      auto st = sp.grid.stencil(node.z);
      for (int m = 0; m < st.count; ++m) {
        const int s = sp.field_slot[st.node[m]];
        if (s < 0) continue;
        const double w = fac * st.weight[m];
        const std::size_t base = static_cast<std::size_t>(s) * sp.ncomp;
        for (int c = 0; c < sp.ncomp; ++c) {
          if (acc[base + c] == 0.0) used.push_back(static_cast<int>(base + c));
          acc[base + c] += w * pair[c];
        }
      }
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    auto& row = rows[r];
    row.reserve(used.size());
    for (int d : used) {
      if (acc[d] != 0.0) row.emplace_back(d, acc[d]);
      acc[d] = 0.0;
    }
  });
  std::size_t nnz = 0;
  for (const auto& row : rows) nnz += row.size();
  SpMat T(static_cast<Eigen::Index>(rays.size()), static_cast<Eigen::Index>(nd));
  T.reserve(static_cast<Eigen::Index>(nnz));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    T.startVec(static_cast<Eigen::Index>(r));
    for (auto [d, v] : rows[r]) T.insertBack(static_cast<Eigen::Index>(r), d) = v;
  }
  T.finalize();
  return T;
}

void ray_bbox(const std::vector<Ray>& rays, int dim, Vec& lo, Vec& hi, double pad) {
  lo = Vec::Constant(dim, 1e300);
  hi = Vec::Constant(dim, -1e300);
  for (const Ray& r : rays)
    for (const PhasePoint& s : r.path->states) {
      lo = lo.cwiseMin(s.z);
      hi = hi.cwiseMax(s.z);
    }
  Vec ext = (hi - lo).cwiseMax(1e-6);
  lo -= pad * ext;
  hi += pad * ext;
}

}  // namespace magtomo
