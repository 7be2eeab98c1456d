#pragma once

#include "magtomo/core.hpp"

#include <array>
#include <vector>

namespace magtomo {

// Regular node grid over an axis-aligned box; node k has multi-index with the last axis fastest.
struct Grid {
  int dim = 3;
  Vec lo, hi;
  std::vector<int> shape;

  Grid() = default;
  Grid(const Vec& lo_, const Vec& hi_, const std::vector<int>& shape_);
  static Grid uniform(const Vec& lo, const Vec& hi, int per_axis);

  std::size_t size() const;
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / (shape[axis] - 1); }
  double cell_volume() const;
  std::vector<int> multi_index(std::size_t k) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  Vec node(std::size_t k) const;
  bool on_edge(std::size_t k) const;
  bool contains(const Vec& z) const;

  // Multilinear interpolation stencil: up to 2^dim (node, weight) pairs; empty outside the box.
  struct Stencil {
    int count = 0;
    std::array<std::size_t, 8> node{};
    std::array<double, 8> weight{};
  };
  Stencil stencil(const Vec& z) const;
};

// Node-major samples with ncomp components per node.
struct GridField {
  Grid grid;
  int ncomp = 1;
  Vec data;  // data[k * ncomp + c]

  GridField() = default;
  GridField(const Grid& g, int ncomp_) : grid(g), ncomp(ncomp_), data(Vec::Zero(g.size() * ncomp_)) {}
  static GridField sample(const Grid& g, int ncomp, const VecFn& f);

  Vec at(std::size_t k) const { return data.segment(k * ncomp, ncomp); }
  void set(std::size_t k, const Vec& v) { data.segment(k * ncomp, ncomp) = v; }
  Vec operator()(const Vec& z) const;
  // Central differences of component c along `axis` at node k, one-sided at the box edges.
  double diff(std::size_t k, int c, int axis) const;
};

}  // namespace magtomo
