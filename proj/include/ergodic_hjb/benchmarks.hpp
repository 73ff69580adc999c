#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace ergodic_hjb {

/// Built-in scenario: config sections that a config may reference by name.
struct BenchmarkInfo {
  std::string name;
  std::string anchor;  // title of the worked example the scenario reproduces
  std::string description;
  nlohmann::json system;
  nlohmann::json lagrangian;
  nlohmann::json grid;
  nlohmann::json solver;
};

/// Fixed catalog, in a stable order.
const std::vector<BenchmarkInfo>& list_benchmarks();
/// Throws InputError naming the known benchmarks.
const BenchmarkInfo& find_benchmark(const std::string& name);

}  // namespace ergodic_hjb
