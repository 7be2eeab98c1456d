#include "commands.hpp"

#include "magtomo/io.hpp"
#include "magtomo/parallel.hpp"
#include "magtomo/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <random>

namespace magtomo::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::string command;
  RunConfig cfg;
  const Options* opt = nullptr;
  json report;

  // An explicit file name in --out wins; otherwise `name` inside the output directory.
  std::string file(const std::string& name, const std::string& ext) const {
    fs::path o(opt->out);
    if (o.has_extension() && o.extension() == ext) return o.string();
    return (fs::path(cfg.out_dir) / name).string();
  }
};

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec required_vec(const std::vector<double>& v, int n, const std::string& path) {
  if (static_cast<int>(v.size()) != n) throw ValidationError(path, "expected " + std::to_string(n) + " numbers");
  return Eigen::Map<const Vec>(v.data(), n);
}

// Overlay of a single section onto the defaults; keeps field paths intact for error messages.
RunConfig section_config(const std::string& section, const std::string& path) {
  json doc;
  doc[section] = read_json(path);
  return parse_config(doc);
}

GridField physical_field(const LayerSpace& space, const Vec& c) {
  const int q = space.ncomp;
  GridField f(space.grid, q);
  Vec a, b;
  for (std::size_t k = 0; k < space.grid.size(); ++k) {
    space.physical(c, space.grid.node(k), a, b);
    Vec o(q);
    o << a, b;
    f.set(k, o);
  }
  return f;
}

json inversion_json(const InversionResult& r) {
  json j;
  j["residual"] = r.residual;
  j["gauge_residual"] = r.gauge_residual;
  j["iterations"] = r.iterations;
  j["cg_residual"] = r.cg_residual;
  j["reg"] = r.reg;
  j["ill_posed"] = r.ill_posed;
  j["stability_ratio"] = r.stability_ratio ? json(*r.stability_ratio) : json(nullptr);
  j["relative_error"] = r.relative_error ? json(*r.relative_error) : json(nullptr);
  return j;
}

// Field to transform: grid manifest (has "grid"), component expressions, or nothing (builtin).
struct FieldSource {
  std::optional<TensorPair> pair;
  std::optional<GridField> grid;
  Kind kind = Kind::BF;
};

FieldSource load_field(const std::string& path, const ChartGeometry& g) {
  FieldSource src;
  if (path.empty()) return src;
  json doc = read_json(path);
  if (doc.contains("grid")) {
    src.grid = read_field(path, &src.kind);
    src.pair = grid_pair(src.kind, *src.grid);
    return src;
  }
  json wrapped;
  wrapped["field"] = doc;
  FieldSpec spec = parse_config(wrapped).field;
  if (spec.first.empty()) throw ValidationError("field.first", "expressions required in a field file");
  src.kind = spec.kind;
  src.pair = expression_pair(spec, g);
  return src;
}

Vec transform_rays(const Integrand& f, const std::vector<Ray>& rays) {
  Vec d(static_cast<Eigen::Index>(rays.size()));
  parallel_for(rays.size(), [&](std::size_t r) { d[static_cast<Eigen::Index>(r)] = ray_transform(f, *rays[r].path); });
  return d;
}

void cmd_geodesic(Context& cx) {
  const RunConfig& c = cx.cfg;
  ChartGeometry g = build_geometry(c.geometry);
  const int n = g.dim;
  PhasePoint start{required_vec(c.z0, n, "geodesic.z0"), required_vec(c.v0, n, "geodesic.v0")};
  // stops at the exit from M when that comes before t_max
  GeodesicPath path = integrate(g, start, 0.0, c.t_max, c.ctl);
  // resample on a uniform time grid so the CSV does not depend on the step history
  GeodesicPath out;
  const int m = std::max(2, c.samples);
  for (int k = 0; k < m; ++k) {
    const double t = path.times.front() + (path.times.back() - path.times.front()) * k / (m - 1);
    out.times.push_back(t);
    out.states.push_back(path.state_at(t));
  }
  const std::string csv = cx.file("path.csv", ".csv");
  write_csv(csv, path_table(out));
  cx.report["path"] = csv;
  cx.report["t_end"] = path.times.back();
  cx.report["steps"] = path.size();
  cx.report["speed_drift"] = speed_drift(path);
  cx.report["end"] = {{"z", vec_json(path.states.back().z)}, {"v", vec_json(path.states.back().v)}};
}

void cmd_convexity(Context& cx) {
  const RunConfig& c = cx.cfg;
  ChartGeometry g = build_geometry(c.geometry);
  const int n = g.dim;
  Vec z = c.z0.empty() ? base_point(c, g) : required_vec(c.z0, n, "geodesic.z0");
  if (std::abs(g.boundary_fn(z)) > 1e-8) z = project_to_boundary(g, z);
  BoundaryFrame fr = boundary_frame(g, z);
  double lo = 1e300;
  Vec arg;
  for (const Vec& w : sphere_directions(n - 1, c.samples, c.seed)) {
    Vec v = Vec::Zero(n);
    for (int k = 0; k < n - 1; ++k) v += w[k] * fr.tangent[k];
    const double q = magnetic_convexity(g, fr, v);
    if (q < lo) {
      lo = q;
      arg = v;
    }
  }
  cx.report["point"] = vec_json(z);
  cx.report["min_value"] = lo;
  cx.report["argmin_v"] = vec_json(arg);
  cx.report["strictly_convex"] = lo > 0.0;
}

void cmd_foliation(Context& cx) {
  const RunConfig& c = cx.cfg;
  ChartGeometry g = build_geometry(c.geometry);
  ScheduleSpec spec = cx.opt->schedule.empty() ? c.schedule : section_config("schedule", cx.opt->schedule).schedule;
  LayerSchedule s = schedule_from(spec, g.dim);
  s.validate();
  FoliationReport rep = foliation_check(g, s.tau, s.levels, s.center, c.samples, 8);
  json levels = json::array();
  for (const LevelReport& l : rep.levels)
    levels.push_back({{"t", l.t}, {"min_value", l.min_value}, {"pass", l.pass}});
  cx.report["levels"] = levels;
  cx.report["pass"] = rep.pass;
}

void cmd_trapping(Context& cx) {
  const RunConfig& c = cx.cfg;
  ChartGeometry g = build_geometry(c.geometry);
  const int n = g.dim;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  std::vector<PhasePoint> seeds;
  for (int tries = 0; static_cast<int>(seeds.size()) < c.samples && tries < 1000 * c.samples; ++tries) {
    Vec z(n), v(n);
    for (int i = 0; i < n; ++i) z[i] = g.bbox_lo[i] + (g.bbox_hi[i] - g.bbox_lo[i]) * u(rng);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    if (!(g.boundary_fn(z) > 0.0)) continue;
    seeds.push_back({z, v / gnorm(g, z, v)});
  }
  TrappingReport rep = trapping_check(g, g.boundary_fn, c.t_max, seeds, c.ctl);
  json trapped = json::array();
  for (const PhasePoint& p : rep.trapped) trapped.push_back({{"z", vec_json(p.z)}, {"v", vec_json(p.v)}});
  cx.report["seeds"] = rep.seeds;
  cx.report["trapped"] = trapped;
  cx.report["non_trapping"] = rep.trapped.empty();
}

void cmd_transform(Context& cx) {
  RunConfig fc = cx.opt->family.empty() ? cx.cfg : load_config(cx.opt->family);
  auto lp = build_local(fc);
  FieldSource src = load_field(cx.opt->field, lp->geo);
  FamilyData data;
  if (src.pair) {
    data = transform_family(*src.pair, lp->family);
  } else {
    // builtin bump, sampled on the family grid
    data.values = transform_rays(lp->space.integrand(chart_bump(*lp, fc.field.radius)), lp->rays);
  }
  const std::string csv = cx.file("If.csv", ".csv");
  write_csv(csv, transform_table(lp->family, data));
  cx.report["data"] = csv;
  cx.report["entries"] = lp->family.entries.size();
  cx.report["rejected"] = lp->family.rejected;
  cx.report["max_abs"] = data.values.size() ? data.values.cwiseAbs().maxCoeff() : 0.0;
}

SymbolParams symbol_params(const Context& cx, double F) {
  const Kind kind = cx.opt->kind ? parse_kind(*cx.opt->kind, "kind") : cx.cfg.kind;
  return SymbolParams::defaults(kind, cx.cfg.geometry.dim, F);
}

FreqGrid freq_grid(const Context& cx) {
  return cx.opt->grid.empty() ? cx.cfg.freq : section_config("symbol", cx.opt->grid).freq;
}

json scan_json(const ScanReport& r) {
  json j;
  j["min_eig"] = r.min_eig;
  j["argmin_freq"] = {{"xi", r.argmin_xi}, {"eta", vec_json(r.argmin_eta)}};
  j["kernel_dims"] = {{"min", r.kernel_dim_min}, {"max", r.kernel_dim_max}};
  j["frequencies"] = r.frequencies;
  j["positive"] = r.positive;
  return j;
}

void cmd_symbol_check(Context& cx) {
  const double F = cx.opt->F.value_or(cx.cfg.F);
  if (!(F > 0.0)) throw ValidationError("F", "must be positive");
  SymbolParams prm = symbol_params(cx, F);
  ScanReport r = ellipticity_scan(prm, freq_grid(cx), ScanMode::Finite);
  cx.report["kind"] = kind_name(prm.kind);
  cx.report["F"] = F;
  cx.report.update(scan_json(r));
}

void cmd_find_f0(Context& cx) {
  SymbolParams prm = symbol_params(cx, 1.0);
  ScanReport r;
  const double F0 = find_F0(prm, freq_grid(cx), &r);
  cx.report["kind"] = kind_name(prm.kind);
  cx.report["F0"] = F0;
  cx.report["scan_at_F0"] = scan_json(r);
}

void cmd_invert_local(Context& cx) {
  if (cx.opt->data.empty()) throw ValidationError("data", "--data is required");
  auto lp = build_local(cx.cfg);
  Vec data = transform_values(lp->family, read_csv(cx.opt->data));
  FieldSource src = load_field(cx.opt->field, lp->geo);
  std::optional<Vec> truth;
  if (src.pair) truth = lp->space.conjugate(*src.pair);
  InversionResult r = invert_local(lp->space, *lp->proj, lp->rays, data, lp->chi, cx.cfg.inversion,
                                   truth ? &*truth : nullptr);
  const std::string out = cx.file("recon.json", ".json");
  write_field(out, fs::path(out).stem().string() + ".csv", cx.cfg.kind, physical_field(lp->space, r.solenoidal));
  cx.report["recon"] = out;
  cx.report["diagnostics"] = inversion_json(r);
  if (r.ill_posed) throw Error(ErrorCode::IllPosed, "data residual above the ill-posedness threshold");
}

void cmd_invert_global(Context& cx) {
  const RunConfig& c = cx.cfg;
  ChartGeometry g = build_geometry(c.geometry);
  ScheduleSpec spec = cx.opt->schedule.empty() ? c.schedule : section_config("schedule", cx.opt->schedule).schedule;
  LayerSchedule s = schedule_from(spec, g.dim);
  s.validate();
  LayerStripParams prm = c.layers;
  prm.kind = c.kind;
  const Vec lo = prm.lo.size() ? prm.lo : g.bbox_lo;
  const Vec hi = prm.hi.size() ? prm.hi : g.bbox_hi;
  const Grid grid = Grid::uniform(lo, hi, prm.grid_n);

  FieldSource src = load_field(cx.opt->field, g);
  if (!src.pair) {
    // builtin truth: radial bump over the outer five sixths of the stripped region
    const double a = s.levels.back(), b = s.levels.front();
    src.grid = radial_bump(prm.kind, g, grid, s.center, a + (b - a) / 6.0, b);
    src.kind = prm.kind;
    src.pair = grid_pair(prm.kind, *src.grid);
  }
  if (src.kind != prm.kind) throw ValidationError("field.kind", "does not match the configured kind");
  // grid fields are integrated exactly as the reconstruction model sees them
  Integrand f = src.grid ? grid_integrand(prm.kind, *src.grid) : as_integrand(*src.pair);
  RayOracle oracle = [f](const GeodesicPath& p) { return ray_transform(f, p); };
  LayerStripResult res = layer_strip(g, s, oracle, prm, &*src.pair);

  const std::string out = cx.file("recon.json", ".json");
  write_field(out, fs::path(out).stem().string() + ".csv", prm.kind, res.field);
  json layers = json::array();
  for (const LayerReport& l : res.layers) {
    json j = inversion_json(l.inversion);
    j["t_inner"] = l.t_inner;
    j["t_outer"] = l.t_outer;
    j["rays"] = l.rays;
    j["rejected_rays"] = l.rejected_rays;
    j["dofs"] = l.dofs;
    j["layer_error"] = l.layer_error ? json(*l.layer_error) : json(nullptr);
    j["overlap_change"] = l.overlap_change ? json(*l.overlap_change) : json(nullptr);
    j["overlap_consistent"] = l.overlap_consistent;
    layers.push_back(j);
  }
  cx.report["recon"] = out;
  cx.report["layers"] = layers;
  cx.report["global_error"] = res.global_error ? json(*res.global_error) : json(nullptr);
  cx.report["overlaps_consistent"] = res.overlaps_consistent;
}

void cmd_roundtrip(Context& cx) {
  auto lp = build_local(cx.cfg);
  FieldSource src = load_field(cx.opt->field, lp->geo);
  const Vec truth = src.pair ? lp->space.conjugate(*src.pair) : chart_bump(*lp, cx.cfg.field.radius);
  // data of the discretized truth, so the check isolates the inversion
  FamilyData data{transform_rays(lp->space.integrand(truth), lp->rays), {}};
  write_csv(cx.file("If.csv", ".csv"), transform_table(lp->family, data));
  InversionResult r = invert_local(lp->space, *lp->proj, lp->rays, data.values, lp->chi, cx.cfg.inversion, &truth);
  write_field((fs::path(cx.cfg.out_dir) / "recon.json").string(), "recon.csv", cx.cfg.kind,
              physical_field(lp->space, r.solenoidal));
  cx.report["diagnostics"] = inversion_json(r);
  cx.report["relative_error"] = *r.relative_error;
  cx.report["pass"] = *r.relative_error <= 0.05;
  cx.report["rays"] = lp->rays.size();
  cx.report["dofs"] = lp->space.field_dofs();
}

const std::map<std::string, void (*)(Context&)>& table() {
  static const std::map<std::string, void (*)(Context&)> t{
      {"geodesic", cmd_geodesic},         {"convexity", cmd_convexity},     {"foliation", cmd_foliation},
      {"trapping", cmd_trapping},         {"transform", cmd_transform},     {"symbol-check", cmd_symbol_check},
      {"find-f0", cmd_find_f0},           {"invert-local", cmd_invert_local}, {"invert-global", cmd_invert_global},
      {"roundtrip", cmd_roundtrip}};
  return t;
}

int thread_request(const Options& opt, const RunConfig& cfg) {
  if (opt.threads) return *opt.threads;
  if (const char* env = std::getenv("MAGTOMO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw ValidationError("MAGTOMO_THREADS", "not a nonnegative integer");
    return static_cast<int>(v);
  }
  return cfg.threads;
}

void emit(const Context& cx) {
  std::cout << cx.report.dump(2) << '\n';
  std::error_code ec;
  fs::create_directories(cx.cfg.out_dir, ec);
  write_json((fs::path(cx.cfg.out_dir) / (cx.command + ".json")).string(), cx.report);
}

}  // namespace

int run(const std::string& command, const Options& opt) {
  Context cx;
  cx.command = command;
  cx.opt = &opt;
  try {
    auto it = table().find(command);
    if (it == table().end()) throw ValidationError("command", "unknown command '" + command + "'");
    cx.cfg = load_config(opt.config);
    if (opt.seed) cx.cfg.seed = static_cast<std::uint64_t>(*opt.seed);
    fs::path o(opt.out);
    cx.cfg.out_dir = o.has_extension() ? (o.has_parent_path() ? o.parent_path().string() : ".") : o.string();
    fs::create_directories(cx.cfg.out_dir);
    const int threads = thread_request(opt, cx.cfg);
    if (threads < 0) throw ValidationError("threads", "must be nonnegative");
    if (threads > 0) set_thread_count(threads);
    cx.report = report_header(command, cx.cfg);
    cx.report["threads"] = thread_count();
    it->second(cx);
    emit(cx);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    json r = cx.report.is_null() ? json{{"command", command}, {"version", version()}} : cx.report;
    r["error"] = {{"kind", "validation"}, {"path", e.path()}, {"message", e.what()}};
    std::cout << r.dump(2) << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    cx.report["error"] = {{"kind", "numerical"}, {"code", error_name(e.code())}, {"message", e.what()}};
    try {
      emit(cx);
    } catch (const std::exception&) {
      std::cout << cx.report.dump(2) << '\n';
    }
    return 3;
  }
}

}  // namespace magtomo::cli
