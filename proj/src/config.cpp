#include "ergodic_hjb/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <cmath>

#include "ergodic_hjb/benchmarks.hpp"
#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

namespace field {

namespace {

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(join(path, key), "required field is missing");
  return *it;
}

double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(path, "expected a finite number");
  return x;
}

}  // namespace

const Json* find(const Json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number(const Json& j, const std::string& key, const std::string& path, std::optional<double> fallback) {
  if (fallback && find(j, key) == nullptr) return *fallback;
  return as_number(require(j, key, path), join(path, key));
}

int integer(const Json& j, const std::string& key, const std::string& path, std::optional<int> fallback) {
  if (fallback && find(j, key) == nullptr) return *fallback;
  const Json& v = require(j, key, path);
  if (!v.is_number_integer()) throw SchemaError(join(path, key), "expected an integer");
  return v.get<int>();
}

bool boolean(const Json& j, const std::string& key, const std::string& path, std::optional<bool> fallback) {
  if (fallback && find(j, key) == nullptr) return *fallback;
  const Json& v = require(j, key, path);
  if (!v.is_boolean()) throw SchemaError(join(path, key), "expected true or false");
  return v.get<bool>();
}

std::string string(const Json& j, const std::string& key, const std::string& path,
                   std::optional<std::string> fallback) {
  if (fallback && find(j, key) == nullptr) return *fallback;
  const Json& v = require(j, key, path);
  if (!v.is_string()) throw SchemaError(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const Json& j, const std::string& key, const std::string& path,
                            std::optional<std::vector<double>> fallback) {
  if (fallback && find(j, key) == nullptr) return *fallback;
  const Json& v = require(j, key, path);
  const std::string p = join(path, key);
  if (!v.is_array()) throw SchemaError(p, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], p + "/" + std::to_string(i)));
  return out;
}

Vec vector(const Json& j, const std::string& key, const std::string& path, std::optional<Vec> fallback) {
  if (fallback && find(j, key) == nullptr) return *fallback;
  auto v = numbers(j, key, path);
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<Vec> points(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require(j, key, path);
  const std::string p = join(path, key);
  if (!v.is_array()) throw SchemaError(p, "expected an array of points");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string pi = p + "/" + std::to_string(i);
    if (!v[i].is_array()) throw SchemaError(pi, "expected an array of numbers");
    Vec x(static_cast<Eigen::Index>(v[i].size()));
    for (std::size_t k = 0; k < v[i].size(); ++k)
      x(static_cast<Eigen::Index>(k)) = as_number(v[i][k], pi + "/" + std::to_string(k));
    out.push_back(std::move(x));
  }
  return out;
}

void only(const Json& j, const std::vector<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw SchemaError(join(path, it.key()), "unknown field");
}

}  // namespace field

namespace {

Mat matrix(const Json& j, const std::string& key, const std::string& path) {
  const std::string p = path + "/" + key;
  auto rows = field::points(j, key, path);
  if (rows.empty()) throw SchemaError(p, "matrix needs at least one row");
  const auto cols = rows[0].size();
  if (cols == 0) throw SchemaError(p, "matrix needs at least one column");
  Mat m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw SchemaError(p + "/" + std::to_string(r), "rows must have equal length");
    m.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  return m;
}

Expression expression(const Json& j, const std::string& key, const std::string& path, int dimension) {
  const std::string text = field::string(j, key, path);
  try {
    return Expression::parse(text, dimension);
  } catch (const InputError& e) {
    throw SchemaError(path + "/" + key, e.what());
  }
}

GrowthBound growth_bound(const Json& j, const std::string& path) {
  const Json* b = field::find(j, "beta");
  if (b == nullptr) return {};
  const std::string p = path + "/beta";
  if (b->is_string()) {
    Expression e = expression(j, "beta", path, 1);
    return GrowthBound([e](double r) { return e({&r, 1}); }, e.text());
  }
  auto knots = field::points(j, "beta", path);
  std::vector<std::pair<double, double>> table;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (knots[i].size() != 2) throw SchemaError(p + "/" + std::to_string(i), "expected [radius, bound]");
    table.emplace_back(knots[i](0), knots[i](1));
  }
  try {
    return GrowthBound::table(std::move(table));
  } catch (const InputError& e) {
    throw SchemaError(p, e.what());
  }
}

void check_dimension(const Vec& v, int expected, const std::string& path) {
  if (v.size() != expected)
    throw SchemaError(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
}

}  // namespace

ControlSystem system_from_json(const Json& j, const std::string& path) {
  const std::string kind = field::string(j, "kind", path);
  if (kind == "heisenberg") {
    field::only(j, {"kind"}, path);
    return ControlSystem::heisenberg();
  }
  if (kind == "grushin") {
    field::only(j, {"kind", "phi", "c_f"}, path);
    Expression phi = expression(j, "phi", path, 1);
    if (!phi.is_polynomial()) throw SchemaError(path + "/phi", "phi must be a polynomial in x");
    const double c_f = field::number(j, "c_f", path, 1.0);
    if (c_f < 0.0) throw SchemaError(path + "/c_f", "must be nonnegative");
    return ControlSystem::grushin(phi, c_f);
  }
  if (kind == "euclidean") {
    field::only(j, {"kind", "dimension"}, path);
    const int d = field::integer(j, "dimension", path, 2);
    if (d < 1 || d > kMaxDim) throw SchemaError(path + "/dimension", "must be between 1 and 16");
    return ControlSystem::euclidean(d);
  }
  if (kind == "linear") {
    field::only(j, {"kind", "A", "B", "c_f", "name"}, path);
    Mat a = matrix(j, "A", path), b = matrix(j, "B", path);
    if (a.rows() != a.cols()) throw SchemaError(path + "/A", "must be square");
    if (b.rows() != a.rows()) throw SchemaError(path + "/B", "must have as many rows as A");
    std::optional<double> c_f;
    if (field::find(j, "c_f") != nullptr) c_f = field::number(j, "c_f", path);
    return ControlSystem::linear(field::string(j, "name", path, std::string("linear")), a, b, c_f);
  }
  if (kind == "double_integrator") {
    field::only(j, {"kind"}, path);
    return ControlSystem::double_integrator();
  }
  if (kind == "harmonic_oscillator") {
    field::only(j, {"kind"}, path);
    return ControlSystem::harmonic_oscillator();
  }
  throw SchemaError(path + "/kind",
                    "unknown system kind '" + kind +
                        "' (expected heisenberg, grushin, euclidean, linear, double_integrator or "
                        "harmonic_oscillator)");
}

Lagrangian lagrangian_from_json(const Json& j, const ControlSystem& system, const std::string& path) {
  const int d = system.dimension(), m = system.control_dimension();
  const std::string kind = field::string(j, "kind", path);
  if (kind == "constant") {
    field::only(j, {"kind", "value"}, path);
    return Lagrangian::constant(d, m, field::number(j, "value", path));
  }
  if (kind != "quadratic_plus_potential")
    throw SchemaError(path + "/kind",
                      "unknown lagrangian kind '" + kind + "' (expected quadratic_plus_potential or constant)");
  field::only(j,
              {"kind", "g", "u_star", "x_star", "ell1", "theta", "K_radius", "beta", "normalized"},
              path);
  Expression g = expression(j, "g", path, d);
  const Vec u_star = field::vector(j, "u_star", path, Vec(Vec::Zero(m)));
  const Vec x_star = field::vector(j, "x_star", path, Vec(Vec::Zero(d)));
  check_dimension(u_star, m, path + "/u_star");
  check_dimension(x_star, d, path + "/x_star");
  LagrangianConstants c;
  c.ell1 = field::number(j, "ell1", path, 1.0);
  c.theta = field::number(j, "theta", path, 0.0);
  c.k_radius = field::number(j, "K_radius", path, 1.0);
  c.normalized = field::boolean(j, "normalized", path, false);
  c.beta = growth_bound(j, path);
  if (!(c.ell1 > 0.0)) throw SchemaError(path + "/ell1", "must be positive");
  if (c.theta < 0.0) throw SchemaError(path + "/theta", "must be nonnegative");
  if (!(c.k_radius > 0.0)) throw SchemaError(path + "/K_radius", "must be positive");
  return Lagrangian::quadratic_plus_potential(
      d, [g](std::span<const double> x) { return g(x); }, u_star, x_star, std::move(c), g.text());
}

Grid grid_from_json(const Json& j, int dimension, const std::string& path) {
  field::only(j, {"lower", "upper", "nodes", "half_width"}, path);
  std::vector<double> lower, upper;
  std::vector<int> nodes;
  if (field::find(j, "half_width") != nullptr) {
    if (field::find(j, "lower") || field::find(j, "upper"))
      throw SchemaError(path + "/half_width", "give either half_width or lower/upper, not both");
    const double h = field::number(j, "half_width", path);
    lower.assign(static_cast<std::size_t>(dimension), -h);
    upper.assign(static_cast<std::size_t>(dimension), h);
  } else {
    lower = field::numbers(j, "lower", path);
    upper = field::numbers(j, "upper", path);
  }
  const Json& n = *(field::find(j, "nodes") ? field::find(j, "nodes") : throw SchemaError(path + "/nodes", "required field is missing"));
  if (n.is_number_integer()) {
    nodes.assign(static_cast<std::size_t>(dimension), n.get<int>());
  } else if (n.is_array()) {
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (!n[i].is_number_integer()) throw SchemaError(path + "/nodes/" + std::to_string(i), "expected an integer");
      nodes.push_back(n[i].get<int>());
    }
  } else {
    throw SchemaError(path + "/nodes", "expected an integer or an array of integers");
  }
  const auto d = static_cast<std::size_t>(dimension);
  if (lower.size() != d) throw SchemaError(path + "/lower", "expected " + std::to_string(d) + " entries");
  if (upper.size() != d) throw SchemaError(path + "/upper", "expected " + std::to_string(d) + " entries");
  if (nodes.size() != d) throw SchemaError(path + "/nodes", "expected " + std::to_string(d) + " entries");
  for (std::size_t k = 0; k < d; ++k)
    if (nodes[k] < 3)
      throw SchemaError(path + "/nodes/" + std::to_string(k),
                        std::to_string(nodes[k]) + " nodes; at least 3 nodes per axis are required");
  try {
    return Grid(lower, upper, nodes);
  } catch (const InputError& e) {
    throw SchemaError(path, e.what());
  }
}

SolverConfig solver_from_json(const Json& j, const std::string& path) {
  field::only(j, {"dt", "mesh", "boundary", "tolerance", "max_iterations"}, path);
  SolverConfig c;
  c.dt = field::number(j, "dt", path, 0.0);
  if (c.dt < 0.0) throw SchemaError(path + "/dt", "must be positive (or 0 for the default)");
  if (const Json* mesh = field::find(j, "mesh")) {
    const std::string p = path + "/mesh";
    field::only(*mesh, {"radius", "points_per_axis", "ball"}, p);
    c.mesh.radius = field::number(*mesh, "radius", p, c.mesh.radius);
    c.mesh.points_per_axis = field::integer(*mesh, "points_per_axis", p, c.mesh.points_per_axis);
    c.mesh.ball = field::boolean(*mesh, "ball", p, c.mesh.ball);
    if (!(c.mesh.radius > 0.0)) throw SchemaError(p + "/radius", "must be positive");
    if (c.mesh.points_per_axis < 2) throw SchemaError(p + "/points_per_axis", "must be at least 2");
  }
  const std::string boundary = field::string(j, "boundary", path, std::string("extend_linear"));
  try {
    c.boundary = boundary_rule_from_string(boundary);
  } catch (const InputError& e) {
    throw SchemaError(path + "/boundary", e.what());
  }
  c.tolerance = field::number(j, "tolerance", path, c.tolerance);
  if (!(c.tolerance > 0.0)) throw SchemaError(path + "/tolerance", "must be positive");
  c.max_iterations = field::integer(j, "max_iterations", path, c.max_iterations);
  if (c.max_iterations < 1) throw SchemaError(path + "/max_iterations", "must be positive");
  return c;
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"validate",        "solve-vt",  "solve-discounted",
                                              "sr-distance",     "ball-box",  "ergodic-estimate",
                                              "corrector",       "lax-oleinik", "list-benchmarks"};
  return names;
}

ExperimentConfig parse_experiment(const Json& j) {
  if (!j.is_object()) throw SchemaError("", "config must be a JSON object");
  field::only(j,
              {"schema_version", "task", "benchmark", "system", "lagrangian", "grid", "solver", "params",
               "assertions", "seed", "output_dir", "threads"},
              "");
  ExperimentConfig c;
  c.schema_version = field::integer(j, "schema_version", "");
  if (c.schema_version != kSchemaVersion)
    throw SchemaError("/schema_version", "unsupported version " + std::to_string(c.schema_version) +
                                             " (this build reads " + std::to_string(kSchemaVersion) + ")");
  c.task = field::string(j, "task", "");
  const auto& tasks = task_names();
  if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end())
    throw SchemaError("/task", "unknown task '" + c.task + "'");
  c.benchmark = field::string(j, "benchmark", "", std::string());
  if (!c.benchmark.empty()) {
    try {
      find_benchmark(c.benchmark);
    } catch (const InputError& e) {
      throw SchemaError("/benchmark", e.what());
    }
  }
  for (const char* key : {"system", "lagrangian", "grid", "solver", "params"}) {
    if (const Json* s = field::find(j, key)) {
      if (!s->is_object()) throw SchemaError(std::string("/") + key, "expected an object");
    }
  }
  if (const Json* s = field::find(j, "system")) c.system = *s;
  if (const Json* s = field::find(j, "lagrangian")) c.lagrangian = *s;
  if (const Json* s = field::find(j, "grid")) c.grid = *s;
  if (const Json* s = field::find(j, "solver")) c.solver = *s;
  if (const Json* s = field::find(j, "params")) c.params = *s;
  if (const Json* a = field::find(j, "assertions")) {
    if (!a->is_array()) throw SchemaError("/assertions", "expected an array");
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string p = "/assertions/" + std::to_string(i);
      const Json& e = (*a)[i];
      field::only(e, {"key", "min", "max"}, p);
      Assertion as;
      as.key = field::string(e, "key", p);
      if (field::find(e, "min")) as.min = field::number(e, "min", p);
      if (field::find(e, "max")) as.max = field::number(e, "max", p);
      if (!as.min && !as.max) throw SchemaError(p, "needs min, max or both");
      c.assertions.push_back(std::move(as));
    }
  }
  if (const Json* s = field::find(j, "seed")) {
    if (!s->is_number_integer() || s->get<std::int64_t>() < 0) throw SchemaError("/seed", "expected a nonnegative integer");
    c.seed = s->get<std::uint64_t>();
  }
  c.output_dir = field::string(j, "output_dir", "", std::string("."));
  c.threads = field::integer(j, "threads", "", 1);
  if (c.threads < 1) throw SchemaError("/threads", "must be at least 1");
  return c;
}

namespace {

// Patches a benchmark section with the config's. A config section that names
// one of `replacing` with a different value (a new kind, another way of
// giving the grid bounds) starts from scratch instead.
void overlay(Json& base, const Json& patch, std::initializer_list<const char*> replacing) {
  if (patch.is_null() || patch.empty()) return;
  for (const char* key : replacing) {
    if (patch.contains(key) && (!base.contains(key) || base[key] != patch[key])) {
      base = patch;
      return;
    }
  }
  base.merge_patch(patch);
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& config) {
  Json system = Json::object(), lagrangian = Json::object(), grid = Json::object(), solver = Json::object();
  if (!config.benchmark.empty()) {
    const auto& b = find_benchmark(config.benchmark);
    system = b.system;
    lagrangian = b.lagrangian;
    grid = b.grid;
    solver = b.solver;
  }
  overlay(system, config.system, {"kind"});
  overlay(lagrangian, config.lagrangian, {"kind"});
  overlay(grid, config.grid, {"half_width", "lower", "upper"});
  overlay(solver, config.solver, {});
  if (system.empty()) throw SchemaError("/system", "required section is missing (or set /benchmark)");
  ControlSystem sys = system_from_json(system);
  std::optional<Lagrangian> lag;
  if (!lagrangian.empty()) lag = lagrangian_from_json(lagrangian, sys);
  std::optional<Grid> g;
  if (!grid.empty()) g = grid_from_json(grid, sys.dimension());
  SolverConfig s = solver_from_json(solver);
  s.threads = config.threads;
  return Scenario{std::move(sys), std::move(lag), std::move(g), s};
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  j["task"] = c.task;
  if (!c.benchmark.empty()) j["benchmark"] = c.benchmark;
  j["system"] = c.system;
  j["lagrangian"] = c.lagrangian;
  j["grid"] = c.grid;
  j["solver"] = c.solver;
  j["params"] = c.params;
  j["assertions"] = Json::array();
  for (const auto& a : c.assertions) {
    Json e{{"key", a.key}};
    if (a.min) e["min"] = *a.min;
    if (a.max) e["max"] = *a.max;
    j["assertions"].push_back(e);
  }
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j;
}

}  // namespace ergodic_hjb
