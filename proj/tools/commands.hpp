#pragma once

#include <optional>
#include <string>

namespace magtomo::cli {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<int> threads;
  std::optional<long long> seed;
  // command-specific inputs
  std::string field, family, data, schedule, grid;
  std::optional<std::string> kind;
  std::optional<double> F;
};

// Exit status: 0 success, 2 validation error, 3 numerical failure (error embedded in the report).
int run(const std::string& command, const Options& opt);

}  // namespace magtomo::cli
