#include "magtomo/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace magtomo {

namespace fs = std::filesystem;

std::string format_number(double v) {
  // shortest representation that round-trips; locale independent
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write '" + path + "'");
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("data", "cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  auto cells = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) {
      if (!c.empty() && c.back() == '\r') c.pop_back();
      out.push_back(c);
    }
    return out;
  };
  if (!std::getline(in, line)) throw ValidationError("data", "empty CSV '" + path + "'");
  t.header = cells(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cs = cells(line);
    if (cs.size() != t.header.size())
      throw ValidationError("data", path + ":" + std::to_string(lineno) + ": wrong number of columns");
    std::vector<double> row(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const char* b = cs[i].data();
      auto r = std::from_chars(b, b + cs[i].size(), row[i]);
      if (r.ec != std::errc() || r.ptr != b + cs[i].size())
        throw ValidationError("data", path + ":" + std::to_string(lineno) + ": not a number '" + cs[i] + "'");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", path + ": invalid JSON: " + e.what());
  }
}

json report_header(const std::string& command, const RunConfig& cfg) {
  json r;
  r["command"] = command;
  r["version"] = version();
  r["config_hash"] = config_hash(cfg.source);
  r["seed"] = cfg.seed;
  return r;
}

CsvTable path_table(const GeodesicPath& path) {
  CsvTable t;
  const int n = path.empty() ? 0 : static_cast<int>(path.states.front().z.size());
  t.header.push_back("t");
  for (int i = 1; i <= n; ++i) t.header.push_back("z" + std::to_string(i));
  for (int i = 1; i <= n; ++i) t.header.push_back("v" + std::to_string(i));
  for (std::size_t k = 0; k < path.size(); ++k) {
    std::vector<double> row{path.times[k]};
    for (int i = 0; i < n; ++i) row.push_back(path.states[k].z[i]);
    for (int i = 0; i < n; ++i) row.push_back(path.states[k].v[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable transform_table(const Family& family, const FamilyData& data) {
  const int n = family.chart.dim();
  CsvTable t;
  t.header = {"ix", "iy", "ilambda", "iomega", "x"};
  for (int i = 1; i < n; ++i) t.header.push_back("y" + std::to_string(i));
  t.header.push_back("lambda");
  for (int i = 1; i <= n - 2; ++i) t.header.push_back("omega" + std::to_string(i));
  t.header.push_back("value");
  for (std::size_t k = 0; k < family.entries.size(); ++k) {
    if (!data.valid.empty() && !data.valid[k]) continue;
    const FamilyEntry& e = family.entries[k];
    std::vector<double> row{double(e.ix), double(e.iy), double(e.il), double(e.iw), e.param.x};
    for (int i = 0; i < n - 1; ++i) row.push_back(e.param.y[i]);
    row.push_back(e.param.lambda);
    for (int i = 0; i < n - 2; ++i) row.push_back(e.omega_angles.size() > i ? e.omega_angles[i] : 0.0);
    row.push_back(data.values[static_cast<Eigen::Index>(k)]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Vec transform_values(const Family& family, const CsvTable& table) {
  if (table.header.size() < 6 || table.header[0] != "ix" || table.header.back() != "value")
    throw ValidationError("data", "transform CSV must start with ix and end with value");
  std::map<std::tuple<int, int, int, int>, double> by_index;
  for (const auto& r : table.rows) by_index[{int(r[0]), int(r[1]), int(r[2]), int(r[3])}] = r.back();
  Vec out(static_cast<Eigen::Index>(family.entries.size()));
  for (std::size_t k = 0; k < family.entries.size(); ++k) {
    const FamilyEntry& e = family.entries[k];
    auto it = by_index.find({e.ix, e.iy, e.il, e.iw});
    if (it == by_index.end())
      throw ValidationError("data", "no value for family entry (" + std::to_string(e.ix) + "," + std::to_string(e.iy) +
                                        "," + std::to_string(e.il) + "," + std::to_string(e.iw) + ")");
    out[static_cast<Eigen::Index>(k)] = it->second;
  }
  return out;
}

std::vector<std::string> component_names(Kind kind, int dim) {
  std::vector<std::string> names;
  if (kind == Kind::BF) {
    for (int i = 1; i <= dim; ++i) names.push_back("beta" + std::to_string(i));
    names.push_back("phi");
  } else {
    for (int i = 1; i <= dim; ++i)
      for (int j = i; j <= dim; ++j) names.push_back("h" + std::to_string(i) + std::to_string(j));
    for (int i = 1; i <= dim; ++i) names.push_back("beta" + std::to_string(i));
  }
  return names;
}

void write_field(const std::string& manifest_path, const std::string& csv_name, Kind kind, const GridField& f) {
  const int n = f.grid.dim;
  json m;
  m["kind"] = kind_name(kind);
  m["grid"]["lo"] = std::vector<double>(f.grid.lo.data(), f.grid.lo.data() + n);
  m["grid"]["hi"] = std::vector<double>(f.grid.hi.data(), f.grid.hi.data() + n);
  m["grid"]["shape"] = f.grid.shape;
  m["grid"]["order"] = "last axis fastest";
  m["components"] = component_names(kind, n);
  m["data"] = csv_name;
  write_json(manifest_path, m);

  CsvTable t;
  t.header = component_names(kind, n);
  if (static_cast<int>(t.header.size()) != f.ncomp) throw ValidationError("field", "component count does not match kind");
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    Vec v = f.at(k);
    t.rows.emplace_back(v.data(), v.data() + v.size());
  }
  write_csv((fs::path(manifest_path).parent_path() / csv_name).string(), t);
}

GridField read_field(const std::string& manifest_path, Kind* kind) {
  json m = read_json(manifest_path);
  try {
    const Kind k = parse_kind(m.at("kind").get<std::string>(), "field.kind");
    if (kind) *kind = k;
    auto lo = m.at("grid").at("lo").get<std::vector<double>>();
    auto hi = m.at("grid").at("hi").get<std::vector<double>>();
    auto shape = m.at("grid").at("shape").get<std::vector<int>>();
    const int n = static_cast<int>(lo.size());
    if (static_cast<int>(hi.size()) != n || static_cast<int>(shape.size()) != n)
      throw ValidationError("field.grid", "lo, hi and shape must have equal length");
    Grid g(Eigen::Map<Vec>(lo.data(), n), Eigen::Map<Vec>(hi.data(), n), shape);
    const auto names = component_names(k, n);
    if (m.contains("components") && m.at("components").get<std::vector<std::string>>() != names)
      throw ValidationError("field.components", "unexpected component order");
    CsvTable t = read_csv((fs::path(manifest_path).parent_path() / m.at("data").get<std::string>()).string());
    if (t.rows.size() != g.size() || t.header.size() != names.size())
      throw ValidationError("field.data", "CSV shape does not match the grid");
    GridField f(g, static_cast<int>(names.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      f.set(r, Eigen::Map<const Vec>(t.rows[r].data(), static_cast<Eigen::Index>(names.size())));
    return f;
  } catch (const json::exception& e) {
    throw ValidationError("field", std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace magtomo
