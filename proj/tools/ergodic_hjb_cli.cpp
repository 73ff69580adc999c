// Command-line front end: one subcommand per experiment task. A config file
// supplies the experiment; flags override its fields.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ergodic_hjb/benchmarks.hpp"
#include "ergodic_hjb/config.hpp"
#include "ergodic_hjb/experiment.hpp"

namespace ehjb = ergodic_hjb;
using ehjb::Json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string benchmark;
  std::string system, lagrangian, grid, solver;
  std::string t_list, lambda_list, probes, from, to;
  std::vector<std::string> params;
  int restarts = 0;
  long long seed = -1;
  std::string out;
  int threads = 0;
  bool dry_run = false;
};

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(flag + ": expected a comma-separated list of numbers");
  return out;
}

// "a,b;c,d" -> [[a,b],[c,d]]
Json parse_points(const std::string& text, const std::string& flag) {
  Json out = Json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_numbers(item, flag));
  return out;
}

// Inline JSON object, or the name of a benchmark whose section is used.
Json section(const std::string& text, const std::string& flag, Json ehjb::BenchmarkInfo::*member) {
  if (!text.empty() && text.front() == '{') {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw UsageError(flag + ": invalid JSON: " + e.what());
    }
  }
  try {
    return ehjb::find_benchmark(text).*member;
  } catch (const std::exception& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--config: cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("--config: " + path + " is not valid JSON: " + e.what());
  }
}

Json build_document(const std::string& task, const Flags& f) {
  Json doc = f.config.empty() ? Json{{"schema_version", ehjb::kSchemaVersion}} : load_config(f.config);
  if (!doc.is_object()) throw UsageError("--config: top level must be an object");
  doc["task"] = task;
  if (!f.benchmark.empty()) doc["benchmark"] = f.benchmark;
  auto patch = [&](const char* key, const std::string& text, const std::string& flag,
                   Json ehjb::BenchmarkInfo::*member) {
    if (text.empty()) return;
    // A named benchmark section replaces the section wholesale.
    if (text.front() != '{' || !doc.contains(key)) doc[key] = section(text, flag, member);
    else doc[key].merge_patch(section(text, flag, member));
  };
  patch("system", f.system, "--system", &ehjb::BenchmarkInfo::system);
  patch("lagrangian", f.lagrangian, "--lagrangian", &ehjb::BenchmarkInfo::lagrangian);
  patch("grid", f.grid, "--grid", &ehjb::BenchmarkInfo::grid);
  patch("solver", f.solver, "--solver", &ehjb::BenchmarkInfo::solver);

  Json& params = doc["params"];
  if (params.is_null()) params = Json::object();
  if (!f.t_list.empty()) params["T_list"] = parse_numbers(f.t_list, "--T-list");
  if (!f.lambda_list.empty()) params["lambda_list"] = parse_numbers(f.lambda_list, "--lambda-list");
  if (!f.probes.empty()) params["probes"] = parse_points(f.probes, "--probes");
  if (!f.from.empty()) params["from"] = parse_numbers(f.from, "--from");
  if (!f.to.empty()) params["to"] = parse_numbers(f.to, "--to");
  if (f.restarts > 0) params["restarts"] = f.restarts;
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param: expected key=value, got '" + kv + "'");
    const std::string value = kv.substr(eq + 1);
    try {
      params[kv.substr(0, eq)] = Json::parse(value);
    } catch (const Json::parse_error&) {
      params[kv.substr(0, eq)] = value;  // bare strings need no quotes
    }
  }
  if (f.seed >= 0) doc["seed"] = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) doc["output_dir"] = f.out;
  if (f.threads > 0) doc["threads"] = f.threads;
  return doc;
}

int run(const std::string& task, const Flags& flags) {
  Json doc;
  try {
    doc = build_document(task, flags);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ehjb::kExitSchemaError;
  }
  ehjb::ExperimentConfig config;
  try {
    config = ehjb::parse_experiment(doc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ehjb::kExitSchemaError;
  }
  // The catalog is the point of list-benchmarks; everything else logs to stderr.
  std::ostream& log = task == "list-benchmarks" ? std::cout : std::cerr;
  const ehjb::RunOutcome outcome = ehjb::run_experiment(config, flags.dry_run, log);
  if (outcome.exit_code == ehjb::kExitSchemaError || outcome.exit_code == ehjb::kExitDivergence)
    return outcome.exit_code;
  if (!flags.dry_run) {
    outcome.summary.write(std::cout);
    std::cerr << "wrote " << outcome.files.size() << " files to " << config.output_dir << '\n';
  }
  return outcome.exit_code;
}

int default_threads() {
  if (const char* env = std::getenv("ERGODIC_HJB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ergodic HJB experiments on sub-Riemannian control systems"};
  app.require_subcommand(1);
  Flags flags;
  flags.threads = default_threads();

  struct TaskInfo {
    const char* name;
    const char* help;
  };
  const std::vector<TaskInfo> tasks{
      {"validate", "Audit the system and cost assumptions, Chow and Kalman rank conditions"},
      {"solve-vt", "Finite-horizon value functions V_T on the grid"},
      {"solve-discounted", "Discounted value functions v_lambda on the grid"},
      {"sr-distance", "Sub-Riemannian energy and distance between two points, or a distance field"},
      {"ball-box", "Sampled ball-box bound and distance exponent"},
      {"ergodic-estimate", "Critical value by the horizon and discounted routes, with Tauberian gaps"},
      {"corrector", "Corrector chi from the vanishing-discount limit"},
      {"lax-oleinik", "Lax-Oleinik iteration from chi to its fixed point"},
      {"list-benchmarks", "Print the built-in scenarios"},
  };
  std::string chosen;
  for (const auto& t : tasks) {
    CLI::App* sub = app.add_subcommand(t.name, t.help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)");
    sub->add_option("--benchmark", flags.benchmark, "Built-in scenario supplying default sections");
    sub->add_option("--system", flags.system, "System section: inline JSON or a benchmark name");
    sub->add_option("--lagrangian", flags.lagrangian, "Lagrangian section: inline JSON or a benchmark name");
    sub->add_option("--grid", flags.grid, "Grid section: inline JSON or a benchmark name");
    sub->add_option("--solver", flags.solver, "Solver section: inline JSON or a benchmark name");
    sub->add_option("--T-list", flags.t_list, "Horizons, e.g. 5,10,20");
    sub->add_option("--lambda-list", flags.lambda_list, "Decreasing discount rates, e.g. 0.2,0.1,0.05");
    sub->add_option("--probes", flags.probes, "Probe points, e.g. '0,0;0.5,0'");
    sub->add_option("--from", flags.from, "Start point, e.g. 0,0,0");
    sub->add_option("--to", flags.to, "End point");
    sub->add_option("--restarts", flags.restarts, "Optimizer restarts per pair")->check(CLI::PositiveNumber);
    sub->add_option("--param", flags.params, "Task parameter override key=value (value is JSON)");
    sub->add_option("--seed", flags.seed, "Random seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--threads", flags.threads, "Solver threads (default: $ERGODIC_HJB_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", flags.dry_run, "Validate and print the plan without solving");
    sub->callback([&chosen, name = std::string(t.name)] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ehjb::kExitSchemaError;
  }
  return run(chosen, flags);
}
