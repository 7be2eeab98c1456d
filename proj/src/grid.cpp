#include "magtomo/grid.hpp"

#include <cmath>

namespace magtomo {

Grid::Grid(const Vec& lo_, const Vec& hi_, const std::vector<int>& shape_)
    : dim(static_cast<int>(lo_.size())), lo(lo_), hi(hi_), shape(shape_) {
  if (static_cast<int>(shape.size()) != dim) throw ValidationError("grid.shape", "length must equal dimension");
  for (int a = 0; a < dim; ++a) {
    if (shape[a] < 2) throw ValidationError("grid.shape", "at least 2 nodes per axis");
    if (!(hi[a] > lo[a])) throw ValidationError("grid.extent", "empty axis");
  }
  if (dim > 3) throw ValidationError("grid.shape", "interpolation supports dimension <= 3");
}

Grid Grid::uniform(const Vec& lo, const Vec& hi, int per_axis) {
  return Grid(lo, hi, std::vector<int>(lo.size(), per_axis));
}

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int m : shape) s *= static_cast<std::size_t>(m);
  return s;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= spacing(a);
  return v;
}

std::vector<int> Grid::multi_index(std::size_t k) const {
  std::vector<int> idx(dim);
  for (int a = dim - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(k % shape[a]);
    k /= shape[a];
  }
  return idx;
}

std::size_t Grid::flat_index(const std::vector<int>& idx) const {
  std::size_t k = 0;
  for (int a = 0; a < dim; ++a) k = k * shape[a] + idx[a];
  return k;
}

Vec Grid::node(std::size_t k) const {
  auto idx = multi_index(k);
  Vec z(dim);
  for (int a = 0; a < dim; ++a) z[a] = lo[a] + idx[a] * spacing(a);
  return z;
}

bool Grid::on_edge(std::size_t k) const {
  auto idx = multi_index(k);
  for (int a = 0; a < dim; ++a)
    if (idx[a] == 0 || idx[a] == shape[a] - 1) return true;
  return false;
}

bool Grid::contains(const Vec& z) const {
  for (int a = 0; a < dim; ++a)
    if (z[a] < lo[a] || z[a] > hi[a]) return false;
  return true;
}

Grid::Stencil Grid::stencil(const Vec& z) const {
  Stencil s;
  if (!contains(z)) return s;
  int base[3] = {0, 0, 0};
  double frac[3] = {0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    double u = (z[a] - lo[a]) / spacing(a);
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, shape[a] - 2);
    base[a] = i;
    frac[a] = u - i;
  }
  const int corners = 1 << dim;
  std::vector<int> idx(dim);
  for (int m = 0; m < corners; ++m) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      int bit = (m >> (dim - 1 - a)) & 1;
      idx[a] = base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    if (w == 0.0) continue;
    s.node[s.count] = flat_index(idx);
    s.weight[s.count] = w;
    ++s.count;
  }
  return s;
}

GridField GridField::sample(const Grid& g, int ncomp, const VecFn& f) {
  GridField out(g, ncomp);
  for (std::size_t k = 0; k < g.size(); ++k) out.set(k, f(g.node(k)));
  return out;
}

Vec GridField::operator()(const Vec& z) const {
  Vec out = Vec::Zero(ncomp);
  auto s = grid.stencil(z);
  for (int m = 0; m < s.count; ++m) out += s.weight[m] * at(s.node[m]);
  return out;
}

double GridField::diff(std::size_t k, int c, int axis) const {
  auto idx = grid.multi_index(k);
  const double h = grid.spacing(axis);
  auto val = [&](int shift) {
    auto j = idx;
    j[axis] += shift;
    return data[grid.flat_index(j) * ncomp + c];
  };
  if (idx[axis] == 0) return (val(1) - val(0)) / h;
  if (idx[axis] == grid.shape[axis] - 1) return (val(0) - val(-1)) / h;
  return (val(1) - val(-1)) / (2.0 * h);
}

}  // namespace magtomo
