#include "magtomo/transform.hpp"

#include "magtomo/parallel.hpp"

namespace magtomo {

std::vector<QuadNode> path_quadrature(const GeodesicPath& path) {
  if (path.trapped_flag || !path.exit_entry || !path.exit_exit)
    throw Error(ErrorCode::TrappedPath, "path has no boundary-to-boundary span");
  std::vector<QuadNode> out;
  const std::size_t m = path.size();
  if (m < 2) return out;
  out.reserve(2 * m - 1);
  for (std::size_t k = 0; k < m; ++k) {
    double wl = k > 0 ? (path.times[k] - path.times[k - 1]) / 6.0 : 0.0;
    double wr = k + 1 < m ? (path.times[k + 1] - path.times[k]) / 6.0 : 0.0;
    out.push_back({path.states[k].z, path.states[k].v, wl + wr});
    if (k + 1 < m) {
      PhasePoint mid = path.state_at(0.5 * (path.times[k] + path.times[k + 1]));
      out.push_back({mid.z, mid.v, 4.0 * wr});
    }
  }
  return out;
}

double ray_transform(const Integrand& f, const GeodesicPath& path) {
  double s = 0.0;
  for (const QuadNode& q : path_quadrature(path)) s += q.w * f(q.z, q.v);
  return s;
}

Integrand as_integrand(const TensorPair& f) {
  return [&f](const Vec& z, const Vec& v) { return evaluate(f, z, v); };
}

double ray_transform(const TensorPair& f, const GeodesicPath& path) { return ray_transform(as_integrand(f), path); }

double ray_transform(const FiberPolynomial& f, const GeodesicPath& path) {
  return ray_transform([&f](const Vec& z, const Vec& v) { return evaluate(f, z, v); }, path);
}

FamilyData transform_family(const Integrand& f, const Family& family) {
  const std::size_t m = family.entries.size();
  if (m == 0) throw Error(ErrorCode::EmptyFamily, "transform of an empty family");
  FamilyData out;
  out.values = Vec::Zero(static_cast<Eigen::Index>(m));
  out.valid.assign(m, 1);
  parallel_for(m, [&](std::size_t i) {
    try {
      out.values[static_cast<Eigen::Index>(i)] = ray_transform(f, family.entries[i].path);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TrappedPath) throw;
      out.valid[i] = 0;
    }
  });
  return out;
}

FamilyData transform_family(const TensorPair& f, const Family& family) {
  return transform_family(as_integrand(f), family);
}

}  // namespace magtomo
