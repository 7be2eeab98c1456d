#pragma once

#include "magtomo/config.hpp"
#include "magtomo/transform.hpp"

#include <string>
#include <vector>

namespace magtomo {

// Comma-separated, '.' decimal, header row, LF endings; numbers in round-trip precision.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);
std::string format_number(double v);

void write_json(const std::string& path, const json& doc);
json read_json(const std::string& path);

// Skeleton every report starts from.
json report_header(const std::string& command, const RunConfig& cfg);

// Path samples: t, z1..zn, v1..vn.
CsvTable path_table(const GeodesicPath& path);

// Family transform: ix, iy, ilambda, iomega, x, y1..y_{n-1}, lambda, omega1..omega_{n-2}, value.
CsvTable transform_table(const Family& family, const FamilyData& data);
// Values matched back to the family entries by their index columns.
Vec transform_values(const Family& family, const CsvTable& table);

// Grid fields: flattened CSV (one row per node, header c0..) plus a JSON manifest with the grid
// spec, kind and component order. `csv_name` is relative to the manifest directory.
void write_field(const std::string& manifest_path, const std::string& csv_name, Kind kind, const GridField& f);
GridField read_field(const std::string& manifest_path, Kind* kind = nullptr);
std::vector<std::string> component_names(Kind kind, int dim);

}  // namespace magtomo
