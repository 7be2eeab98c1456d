#pragma once

#include "magtomo/flow.hpp"
#include "magtomo/tensorfields.hpp"

namespace magtomo {

// Any function on the sphere bundle.
using Integrand = std::function<double(const Vec& z, const Vec& v)>;

struct QuadNode {
  Vec z, v;
  double w = 0.0;
};

// Composite Simpson nodes over [t_entry, t_exit]: path samples plus Hermite-interpolated midpoints.
std::vector<QuadNode> path_quadrature(const GeodesicPath& path);

double ray_transform(const Integrand& f, const GeodesicPath& path);
double ray_transform(const TensorPair& f, const GeodesicPath& path);
double ray_transform(const FiberPolynomial& f, const GeodesicPath& path);

// Values indexed like family.entries; valid[i] == 0 marks a trapped entry (value 0).
struct FamilyData {
  Vec values;
  std::vector<char> valid;
};

FamilyData transform_family(const Integrand& f, const Family& family);
FamilyData transform_family(const TensorPair& f, const Family& family);

Integrand as_integrand(const TensorPair& f);

}  // namespace magtomo
