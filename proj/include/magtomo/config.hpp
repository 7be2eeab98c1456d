#pragma once

#include "magtomo/layers.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace magtomo {

using json = nlohmann::json;

// Geometry strings: metric "euclidean" | "conformal:<c>" | "radial:<c(r)>";
// magnetic "zero" | "constant:<B>" | "potential:<A1>;<A2>;..."; boundary "ball:<r>" | "halfspace" | "expression:<rho>".
struct GeometrySpec {
  int dim = 3;
  std::string metric = "euclidean";
  std::string magnetic = "zero";
  std::string boundary = "ball:1";
  std::vector<double> bbox_lo, bbox_hi;  // empty: cube of half-width 1.5 (ball: 1.02 r)
};
ChartGeometry build_geometry(const GeometrySpec& spec);

// Analytic pair from component expressions, or the builtin compact bump in the chart of the family.
struct FieldSpec {
  Kind kind = Kind::BF;
  std::vector<std::string> first, second;  // empty: builtin
  double radius = 0.4;                     // builtin bump: tangential radius
};

struct GridSpec {
  std::vector<double> lo, hi;  // empty: the ray bounding box
  int n = 16;
};

struct ScheduleSpec {
  std::vector<double> center;  // empty: origin
  std::vector<double> levels{1.0, 0.8, 0.6, 0.4};
  double overlap = -1.0;
};

struct RunConfig {
  json source;                 // the document as read, hashed into every report
  GeometrySpec geometry;
  Kind kind = Kind::BF;
  std::vector<double> p;       // family base point on the boundary; empty: (0, .., 0, r)
  FamilySpec family;
  GridSpec grid;
  double F = 1.0;
  double mu = -1.0;            // cutoff width; < 0: alpha / F at the chart centre
  InversionParams inversion;
  FieldSpec field;
  FreqGrid freq;
  ScheduleSpec schedule;
  LayerStripParams layers;
  // geodesic / trapping / convexity inputs
  std::vector<double> z0, v0;
  double t_max = 10.0;
  StepControl ctl;
  int samples = 64;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 0;
};

RunConfig parse_config(const json& doc);
RunConfig load_config(const std::string& path);  // "" gives the defaults
std::string config_hash(const json& doc);        // FNV-1a 64 of the canonical dump, hex

Kind parse_kind(const std::string& s, const std::string& path);

}  // namespace magtomo
