#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergodic_hjb/grid.hpp"
#include "ergodic_hjb/hjb.hpp"
#include "ergodic_hjb/lagrangian.hpp"
#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Builders for the config sections. Every error is a SchemaError whose path
/// names the offending field; `path` is the location of `j` itself.
ControlSystem system_from_json(const Json& j, const std::string& path = "/system");
Lagrangian lagrangian_from_json(const Json& j, const ControlSystem& system,
                                const std::string& path = "/lagrangian");
Grid grid_from_json(const Json& j, int dimension, const std::string& path = "/grid");
SolverConfig solver_from_json(const Json& j, const std::string& path = "/solver");

/// Summary key bound; the run fails when the value is missing or outside.
struct Assertion {
  std::string key;
  std::optional<double> min;
  std::optional<double> max;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string task;
  std::string benchmark;  // optional; supplies defaults for the four sections
  Json system = Json::object();
  Json lagrangian = Json::object();
  Json grid = Json::object();
  Json solver = Json::object();
  Json params = Json::object();
  std::vector<Assertion> assertions;
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  int threads = 1;
};

/// Everything a task needs, built and validated.
/// Sections a task does not need may be absent.
struct Scenario {
  ControlSystem system;
  std::optional<Lagrangian> lagrangian;
  std::optional<Grid> grid;
  SolverConfig solver;
};

/// Reads and checks the top-level document (field names, types, task name).
/// Section contents are checked by `build_scenario`.
ExperimentConfig parse_experiment(const Json& j);
/// Applies benchmark defaults, merge-patched by the config's own sections (a
/// section with a different kind or grid-bounds form replaces the default),
/// and builds every spec; throws SchemaError.
Scenario build_scenario(const ExperimentConfig& config);
/// The resolved config, suitable for writing next to the outputs.
Json to_json(const ExperimentConfig& config);

const std::vector<std::string>& task_names();

/// Typed field access with path-aware errors, shared with the CLI.
namespace field {
const Json* find(const Json& j, const std::string& key);
double number(const Json& j, const std::string& key, const std::string& path,
              std::optional<double> fallback = std::nullopt);
int integer(const Json& j, const std::string& key, const std::string& path,
            std::optional<int> fallback = std::nullopt);
bool boolean(const Json& j, const std::string& key, const std::string& path,
             std::optional<bool> fallback = std::nullopt);
std::string string(const Json& j, const std::string& key, const std::string& path,
                   std::optional<std::string> fallback = std::nullopt);
Vec vector(const Json& j, const std::string& key, const std::string& path,
           std::optional<Vec> fallback = std::nullopt);
std::vector<double> numbers(const Json& j, const std::string& key, const std::string& path,
                            std::optional<std::vector<double>> fallback = std::nullopt);
std::vector<Vec> points(const Json& j, const std::string& key, const std::string& path);
/// Throws when `j` has a key outside `allowed`.
void only(const Json& j, const std::vector<std::string>& allowed, const std::string& path);
}  // namespace field

}  // namespace ergodic_hjb
