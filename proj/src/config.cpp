#include "magtomo/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace magtomo {

namespace {

std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

// Reader that records the field path of every access and rejects unknown keys.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_null() && !j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  std::string path(const std::string& key) const { return join(path_, key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(path(key), "wrong type");
    }
  }
  double positive(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0)) throw ValidationError(path(key), "must be positive");
    return v;
  }
  double nonnegative(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v >= 0.0)) throw ValidationError(path(key), "must be non-negative");
    return v;
  }
  int count(const std::string& key, int fallback, int min = 1) {
    const int v = get<int>(key, fallback);
    if (v < min) throw ValidationError(path(key), "must be at least " + std::to_string(min));
    return v;
  }
  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json null;
    return Section(has(key) ? j_.at(key) : null, path(key));
  }
  void finish() const {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ValidationError(path(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double parse_number(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(path, "not a number: '" + s + "'");
  }
}

Expr parse_expr(const std::string& s, const std::string& path) {
  try {
    return Expr::parse(s);
  } catch (const std::exception& e) {
    throw ValidationError(path, e.what());
  }
}

std::pair<std::string, std::string> split_spec(const std::string& s) {
  const auto c = s.find(':');
  if (c == std::string::npos) return {s, ""};
  return {s.substr(0, c), s.substr(c + 1)};
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

void check_size(const std::vector<double>& v, int n, const std::string& path) {
  if (!v.empty() && static_cast<int>(v.size()) != n)
    throw ValidationError(path, "expected " + std::to_string(n) + " entries");
}

void read_ctl(Section& s, StepControl& ctl) {
  ctl.tol = s.positive("tol", ctl.tol);
  ctl.h_init = s.positive("h_init", ctl.h_init);
  ctl.h_max = s.positive("h_max", ctl.h_max);
}

}  // namespace

Kind parse_kind(const std::string& s, const std::string& path) {
  if (s == "bf" || s == "BF") return Kind::BF;
  if (s == "hb" || s == "HB") return Kind::HB;
  throw ValidationError(path, "kind must be 'bf' or 'hb'");
}

ChartGeometry build_geometry(const GeometrySpec& spec) {
  if (spec.dim < 2) throw ValidationError("geometry.dim", "must be at least 2");
  ChartGeometry g = euclidean_geometry(spec.dim);

  auto [mk, mv] = split_spec(spec.metric);
  if (mk == "euclidean") {
  } else if (mk == "conformal") {
    set_metric_conformal(g, parse_expr(mv, "geometry.metric"));
  } else if (mk == "radial") {
    set_metric_radial_speed(g, parse_expr(mv, "geometry.metric"));
  } else {
    throw ValidationError("geometry.metric", "unknown metric '" + spec.metric + "'");
  }

  auto [fk, fv] = split_spec(spec.magnetic);
  if (fk == "zero") {
    set_field_zero(g);
  } else if (fk == "constant") {
    if (spec.dim < 2) throw ValidationError("geometry.magnetic", "constant field needs dim >= 2");
    set_field_constant(g, parse_number(fv, "geometry.magnetic"));
  } else if (fk == "potential") {
    std::vector<Expr> A;
    std::stringstream ss(fv);
    std::string part;
    while (std::getline(ss, part, ';')) A.push_back(parse_expr(part, "geometry.magnetic"));
    if (static_cast<int>(A.size()) != spec.dim)
      throw ValidationError("geometry.magnetic", "potential needs one expression per coordinate");
    set_field_potential(g, A);
  } else {
    throw ValidationError("geometry.magnetic", "unknown field '" + spec.magnetic + "'");
  }

  auto [bk, bv] = split_spec(spec.boundary);
  double half = 1.5;
  if (bk == "ball") {
    const double r = bv.empty() ? 1.0 : parse_number(bv, "geometry.boundary");
    if (!(r > 0.0)) throw ValidationError("geometry.boundary", "ball radius must be positive");
    set_boundary_ball(g, r);
    half = 1.02 * r;
  } else if (bk == "halfspace") {
    set_boundary_halfspace(g);
  } else if (bk == "expression") {
    set_boundary_expression(g, parse_expr(bv, "geometry.boundary"));
  } else {
    throw ValidationError("geometry.boundary", "unknown boundary '" + spec.boundary + "'");
  }
  g.bbox_lo = Vec::Constant(spec.dim, -half);
  g.bbox_hi = Vec::Constant(spec.dim, half);
  check_size(spec.bbox_lo, spec.dim, "geometry.bbox_lo");
  check_size(spec.bbox_hi, spec.dim, "geometry.bbox_hi");
  if (!spec.bbox_lo.empty()) g.bbox_lo = to_vec(spec.bbox_lo);
  if (!spec.bbox_hi.empty()) g.bbox_hi = to_vec(spec.bbox_hi);
  for (int i = 0; i < spec.dim; ++i)
    if (!(g.bbox_lo[i] < g.bbox_hi[i])) throw ValidationError("geometry.bbox_hi", "box must have positive extent");
  g.description = spec.metric + " / " + spec.magnetic + " / " + spec.boundary;
  return g;
}

RunConfig parse_config(const json& doc) {
  RunConfig c;
  c.source = doc;
  c.family.c = 0.1;
  c.family.n_x = 12;
  c.family.n_y = 8;
  c.family.n_lambda = 5;
  c.family.s_max = 2.0;
  c.family.n_omega = 5;
  c.family.ctl.h_max = 5e-3;

  Section root(doc, "");
  {
    Section s = root.sub("geometry");
    c.geometry.dim = s.count("dim", 3, 2);
    c.geometry.metric = s.get<std::string>("metric", c.geometry.metric);
    c.geometry.magnetic = s.get<std::string>("magnetic", c.geometry.magnetic);
    c.geometry.boundary = s.get<std::string>("boundary", c.geometry.boundary);
    c.geometry.bbox_lo = s.get<std::vector<double>>("bbox_lo", {});
    c.geometry.bbox_hi = s.get<std::vector<double>>("bbox_hi", {});
    s.finish();
  }
  const int n = c.geometry.dim;
  c.kind = parse_kind(root.get<std::string>("kind", "bf"), "kind");
  {
    Section s = root.sub("family");
    c.p = s.get<std::vector<double>>("p", {});
    check_size(c.p, n, s.path("p"));
    FamilySpec& f = c.family;
    f.c = s.positive("c", f.c);
    f.eps = s.nonnegative("eps", f.eps);
    f.n_x = s.count("n_x", f.n_x);
    f.x_min_frac = s.positive("x_min_frac", f.x_min_frac);
    f.x_max_frac = s.positive("x_max_frac", f.x_max_frac);
    if (!(f.x_min_frac < f.x_max_frac && f.x_max_frac < 1.0))
      throw ValidationError(s.path("x_max_frac"), "need x_min_frac < x_max_frac < 1");
    f.n_y = s.count("n_y", f.n_y);
    f.y_max = s.positive("y_max", f.y_max);
    f.n_lambda = s.count("n_lambda", f.n_lambda);
    f.s_max = s.nonnegative("s_max", f.s_max);
    f.n_omega = s.count("n_omega", f.n_omega);
    f.t_max = s.positive("t_max", f.t_max);
    read_ctl(s, f.ctl);
    s.finish();
  }
  {
    Section s = root.sub("grid");
    c.grid.n = s.count("n", c.grid.n, 3);
    c.grid.lo = s.get<std::vector<double>>("lo", {});
    c.grid.hi = s.get<std::vector<double>>("hi", {});
    check_size(c.grid.lo, n, s.path("lo"));
    check_size(c.grid.hi, n, s.path("hi"));
    if (c.grid.lo.empty() != c.grid.hi.empty()) throw ValidationError(s.path("hi"), "give both lo and hi or neither");
    s.finish();
  }
  {
    Section s = root.sub("inversion");
    c.F = s.nonnegative("F", c.F);
    c.mu = s.get<double>("mu", c.mu);
    InversionParams& p = c.inversion;
    p.reg = s.get<double>("reg", p.reg);
    p.reg_factor = s.positive("reg_factor", p.reg_factor);
    p.ridge = s.nonnegative("ridge", p.ridge);
    p.cg_tol = s.positive("cg_tol", p.cg_tol);
    p.max_iter = s.count("max_iter", p.max_iter);
    p.ill_posed_residual = s.positive("ill_posed_residual", p.ill_posed_residual);
    p.dense_limit = static_cast<std::size_t>(s.count("dense_limit", static_cast<int>(p.dense_limit), 0));
    p.chi_row_weights = s.get<bool>("chi_row_weights", p.chi_row_weights);
    s.finish();
  }
  {
    Section s = root.sub("field");
    c.field.kind = parse_kind(s.get<std::string>("kind", kind_name(c.kind)), s.path("kind"));
    c.field.first = s.get<std::vector<std::string>>("first", {});
    c.field.second = s.get<std::vector<std::string>>("second", {});
    c.field.radius = s.positive("radius", c.field.radius);
    if (c.field.first.empty() != c.field.second.empty())
      throw ValidationError(s.path("second"), "give both component lists or neither");
    s.finish();
  }
  {
    Section s = root.sub("symbol");
    FreqGrid& q = c.freq;
    q.xi_max = s.positive("xi_max", q.xi_max);
    q.eta_max = s.positive("eta_max", q.eta_max);
    q.n_xi = s.count("n_xi", q.n_xi);
    q.n_eta = s.count("n_eta", q.n_eta);
    q.n_inf = s.count("n_inf", q.n_inf);
    q.sphere_order = s.count("sphere_order", q.sphere_order);
    s.finish();
  }
  {
    Section s = root.sub("schedule");
    c.schedule.center = s.get<std::vector<double>>("center", {});
    check_size(c.schedule.center, n, s.path("center"));
    c.schedule.levels = s.get<std::vector<double>>("levels", c.schedule.levels);
    c.schedule.overlap = s.get<double>("overlap", c.schedule.overlap);
    if (c.schedule.levels.size() < 2) throw ValidationError(s.path("levels"), "at least two levels required");
    for (std::size_t i = 1; i < c.schedule.levels.size(); ++i)
      if (!(c.schedule.levels[i] < c.schedule.levels[i - 1]))
        throw ValidationError(s.path("levels"), "levels must strictly decrease");
    if (!(c.schedule.levels.back() > 0.0)) throw ValidationError(s.path("levels"), "levels must be positive");
    s.finish();
  }
  {
    Section s = root.sub("layers");
    LayerStripParams& l = c.layers;
    l.kind = c.kind;
    l.F = s.nonnegative("F", l.F);
    l.mu = s.get<double>("mu", l.mu);
    l.grid_n = s.count("grid_n", l.grid_n, 3);
    l.x_min_frac = s.positive("x_min_frac", l.x_min_frac);
    l.dip = s.nonnegative("dip", l.dip);
    l.n_radii = s.count("n_radii", l.n_radii);
    l.n_points = s.count("n_points", l.n_points);
    l.n_dirs = s.count("n_dirs", l.n_dirs);
    l.n_tilt = s.count("n_tilt", l.n_tilt);
    l.tilt_frac = s.positive("tilt_frac", l.tilt_frac);
    l.inversion.reg_factor = s.positive("reg_factor", l.inversion.reg_factor);
    l.inversion.cg_tol = s.positive("cg_tol", l.inversion.cg_tol);
    l.check_foliation = s.get<bool>("check_foliation", l.check_foliation);
    read_ctl(s, l.ctl);
    s.finish();
  }
  {
    Section s = root.sub("geodesic");
    c.z0 = s.get<std::vector<double>>("z0", {});
    c.v0 = s.get<std::vector<double>>("v0", {});
    check_size(c.z0, n, s.path("z0"));
    check_size(c.v0, n, s.path("v0"));
    c.t_max = s.positive("t_max", c.t_max);
    c.samples = s.count("samples", c.samples);
    read_ctl(s, c.ctl);
    s.finish();
  }
  const auto seed = root.get<long long>("seed", 1);
  if (seed < 0) throw ValidationError("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.out_dir = root.get<std::string>("out", c.out_dir);
  c.threads = root.count("threads", 0, 0);
  root.finish();

  build_geometry(c.geometry);  // validates the geometry strings
  return c;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return parse_config(json::object());
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

std::string config_hash(const json& doc) {
  const std::string s = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace magtomo
