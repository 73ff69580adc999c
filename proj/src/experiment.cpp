#include "ergodic_hjb/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ergodic_hjb/benchmarks.hpp"
#include "ergodic_hjb/ergodic.hpp"
#include "ergodic_hjb/errors.hpp"
#include "ergodic_hjb/hjb.hpp"
#include "ergodic_hjb/srgeometry.hpp"

namespace ergodic_hjb {

namespace {

std::string number_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Short form for keys and file names: 0.05 -> "0.05".
std::string label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void Summary::put(const std::string& key, std::string text, std::optional<double> value) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) {
      entries_[i].second = std::move(text);
      values_[i] = value;
      return;
    }
  }
  entries_.emplace_back(key, std::move(text));
  values_.push_back(value);
}

void Summary::set(const std::string& key, double value) { put(key, number_text(value), value); }
void Summary::set(const std::string& key, long long value) {
  put(key, std::to_string(value), static_cast<double>(value));
}
void Summary::set(const std::string& key, bool value) { put(key, value ? "true" : "false", value ? 1.0 : 0.0); }
void Summary::set(const std::string& key, const std::string& value) { put(key, value, std::nullopt); }

std::optional<double> Summary::number(const std::string& key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].first == key) return values_[i];
  return std::nullopt;
}

const std::string* Summary::text(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

void Summary::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

namespace {

const std::string kParams = "/params";

struct Context {
  const ExperimentConfig& config;
  std::optional<Scenario> scenario;
  Summary summary;
  std::vector<std::string> files;
  std::ostream& log;
  bool dry_run;
  // Checks the task itself imposes, in addition to the configured assertions.
  std::vector<std::pair<std::string, bool>> checks;

  const Json& params() const { return config.params; }
  const ControlSystem& system() const { return scenario->system; }
  const SolverConfig& solver() const { return scenario->solver; }

  const Lagrangian& lagrangian() const {
    if (!scenario->lagrangian)
      throw SchemaError("/lagrangian", "task '" + config.task + "' needs a lagrangian section");
    return *scenario->lagrangian;
  }
  const Grid& grid() const {
    if (!scenario->grid) throw SchemaError("/grid", "task '" + config.task + "' needs a grid section");
    return *scenario->grid;
  }

  std::ofstream open(const std::string& name) {
    const auto path = std::filesystem::path(config.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    files.push_back(name);
    return out;
  }

  void field(const std::string& stem, const ValueField& f) {
    {
      auto out = open(stem + ".csv");
      write_field_csv(out, f);
    }
    auto out = open(stem + ".bin");
    write_field_binary(out, f);
  }

  // Prints the plan when dry-running; the caller returns when this is true.
  bool plan(const std::vector<std::string>& steps) {
    if (!dry_run) return false;
    log << "task: " << config.task << '\n';
    if (!config.benchmark.empty()) log << "benchmark: " << config.benchmark << '\n';
    if (scenario) {
      log << "system: " << system().name() << " (d=" << system().dimension()
          << ", m=" << system().control_dimension() << ")\n";
      if (scenario->grid) {
        log << "grid: " << grid().size() << " nodes";
        if (scenario->lagrangian) log << ", dt " << number_text(resolve_time_step(system(), grid(), solver()));
        log << '\n';
      }
    }
    for (const auto& s : steps) log << "  - " << s << '\n';
    log << "output: " << config.output_dir << '\n';
    return true;
  }
};

std::string join_labels(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + label(x);
  return s;
}

std::vector<double> positive_list(const Json& p, const std::string& key, std::vector<double> fallback) {
  auto v = field::numbers(p, key, kParams, std::move(fallback));
  if (v.empty()) throw SchemaError(kParams + "/" + key, "must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] > 0.0)) throw SchemaError(kParams + "/" + key + "/" + std::to_string(i), "must be positive");
  return v;
}

std::vector<double> decreasing_lambdas(const Json& p, std::vector<double> fallback) {
  auto v = positive_list(p, "lambda_list", std::move(fallback));
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) throw SchemaError(kParams + "/lambda_list", "must be strictly decreasing");
  return v;
}

Vec point(const Json& p, const std::string& key, int d) {
  Vec v = field::vector(p, key, kParams);
  if (v.size() != d)
    throw SchemaError(kParams + "/" + key, "expected " + std::to_string(d) + " coordinates");
  return v;
}

int positive_int(const Json& p, const std::string& key, int fallback) {
  int v = field::integer(p, key, kParams, fallback);
  if (v < 1) throw SchemaError(kParams + "/" + key, "must be positive");
  return v;
}

double positive_number(const Json& p, const std::string& key, double fallback) {
  double v = field::number(p, key, kParams, fallback);
  if (!(v > 0.0)) throw SchemaError(kParams + "/" + key, "must be positive");
  return v;
}

SrOptions sr_options(const Json& p, std::uint64_t seed) {
  SrOptions o;
  o.restarts = positive_int(p, "restarts", o.restarts);
  o.intervals = positive_int(p, "intervals", o.intervals);
  o.seed = seed;
  return o;
}

void write_points_header(std::ostream& out, const char* prefix, int d) {
  for (int k = 1; k <= d; ++k) out << prefix << k << ',';
}

void write_point(std::ostream& out, const Vec& x) {
  for (Eigen::Index k = 0; k < x.size(); ++k) out << number_text(x(k)) << ',';
}

// ---------------------------------------------------------------- tasks

void task_validate(Context& c) {
  const Json& p = c.params();
  field::only(p, {"state_half_width", "control_half_width", "samples", "points", "max_degree"}, kParams);
  const double state_hw = positive_number(p, "state_half_width", 2.0);
  const double control_hw = positive_number(p, "control_half_width", 3.0);
  const int samples = positive_int(p, "samples", 2000);
  const int max_degree = positive_int(p, "max_degree", 4);
  const ControlSystem& sys = c.system();
  const int d = sys.dimension();
  std::vector<Vec> points;
  if (field::find(p, "points")) {
    points = field::points(p, "points", kParams);
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i].size() != d)
        throw SchemaError(kParams + "/points/" + std::to_string(i), "expected " + std::to_string(d) + " coordinates");
  } else {
    points = {Vec::Zero(d), Vec::Constant(d, 0.5)};
  }
  if (c.plan({"audit growth and Lipschitz bounds of f (" + std::to_string(samples) + " samples)",
              c.scenario->lagrangian ? "audit the cost assumptions" : "no lagrangian: cost audit skipped",
              sys.kind() == SystemKind::kDriftlessAffine ? "Chow rank condition at " + std::to_string(points.size()) +
                                                               " points"
                                                         : "Kalman rank condition when linear"}))
    return;

  bool passed = true;
  const GrowthAudit growth = audit_growth(sys, state_hw, control_hw, samples, c.config.seed);
  c.summary.set("growth.lipschitz_ok", growth.lipschitz_ok);
  c.summary.set("growth.growth_ok", growth.growth_ok);
  c.summary.set("growth.affine_ok", growth.affine_ok);
  c.summary.set("growth.worst_lipschitz_quotient", growth.worst_lipschitz_quotient);
  c.summary.set("growth.worst_growth_quotient", growth.worst_growth_quotient);
  passed = passed && growth.lipschitz_ok && growth.growth_ok && growth.affine_ok;

  if (c.scenario->lagrangian) {
    const AssumptionReport report =
        validate_assumptions(c.lagrangian(), sys, state_hw, control_hw, samples, c.config.seed + 1);
    auto out = c.open("assumptions.csv");
    out << "clause,passed,worst,detail\n";
    for (const auto& clause : report.clauses) {
      out << clause.name << ',' << (clause.passed ? "true" : "false") << ',' << number_text(clause.worst) << ",\""
          << clause.detail << "\"\n";
      c.summary.set("assumptions." + clause.name + ".passed", clause.passed);
      c.summary.set("assumptions." + clause.name + ".worst", clause.worst);
    }
    c.summary.set("assumptions.all_passed", report.all_passed());
    passed = passed && report.all_passed();
  }

  if (sys.kind() == SystemKind::kDriftlessAffine) {
    auto out = c.open("chow.csv");
    write_points_header(out, "x_", d);
    out << "holds,degree\n";
    bool all = true;
    int worst = 0;
    for (const Vec& x : points) {
      const ChowReport r = check_chow(sys, x, max_degree);
      write_point(out, x);
      out << (r.holds ? "true" : "false") << ',' << r.degree << '\n';
      all = all && r.holds;
      worst = std::max(worst, r.degree);
    }
    c.summary.set("chow.holds", all);
    c.summary.set("chow.max_degree", worst);
    passed = passed && all;
  }
  if (sys.kind() == SystemKind::kLinear) {
    const bool k = kalman_controllable(sys.a(), sys.b());
    c.summary.set("kalman.controllable", k);
    passed = passed && k;
  }
  c.summary.set("validate.passed", passed);
  c.checks.emplace_back("validate.passed", passed);
}

void task_solve_vt(Context& c) {
  const Json& p = c.params();
  field::only(p, {"T_list"}, kParams);
  const auto horizons = positive_list(p, "T_list", {1.0});
  const Lagrangian& lag = c.lagrangian();
  const Grid& grid = c.grid();
  if (c.plan({"finite-horizon value V_T for T in {" + join_labels(horizons) + "}"})) return;
  const FiniteHorizonResult run = solve_finite_horizon(c.system(), lag, grid, horizons, c.solver());
  c.summary.set("vt.dt", run.dt);
  c.summary.set("vt.steps", run.steps);
  c.summary.set("vt.dt_adjusted", run.dt_adjusted);
  c.summary.set("vt.boundary_fraction", run.boundary_fraction);
  for (std::size_t i = 0; i < run.fields.size(); ++i) {
    const double t = run.checkpoint_times[i];
    const ValueField& f = run.fields[i];
    const std::string key = "vt.T" + label(t);
    c.summary.set(key + ".min", f.min());
    c.summary.set(key + ".max", f.max());
    const double at = f.interpolate(lag.x_star());
    c.summary.set(key + ".at_x_star", at);
    c.summary.set(key + ".over_T_at_x_star", at / t);
    c.field("vt_T" + label(t), f);
  }
}

void task_solve_discounted(Context& c) {
  const Json& p = c.params();
  field::only(p, {"lambda_list"}, kParams);
  const auto lambdas = decreasing_lambdas(p, {0.1});
  const Lagrangian& lag = c.lagrangian();
  const Grid& grid = c.grid();
  if (c.plan({"discounted value v_lambda for lambda in {" + join_labels(lambdas) + "} (warm-started)"})) return;
  const DiscountedSequence seq = solve_discounted_sequence(c.system(), lag, grid, lambdas, c.solver());
  for (std::size_t i = 0; i < seq.fields.size(); ++i) {
    const double l = seq.lambdas[i];
    const ValueField& f = seq.fields[i];
    const std::string key = "vl.L" + label(l);
    c.summary.set(key + ".min", f.min());
    c.summary.set(key + ".max", f.max());
    c.summary.set(key + ".lambda_v_at_x_star", l * f.interpolate(lag.x_star()));
    c.summary.set(key + ".policy_iterations", seq.runs[i].policy_iterations);
    c.summary.set(key + ".value_iterations", seq.runs[i].value_iterations);
    c.summary.set(key + ".dt", seq.runs[i].dt);
    c.field("v_lambda" + label(l), f);
  }
}

void task_sr_distance(Context& c) {
  const Json& p = c.params();
  field::only(p, {"from", "to", "restarts", "intervals", "field", "directions"}, kParams);
  const ControlSystem& sys = c.system();
  const int d = sys.dimension();
  if (sys.kind() != SystemKind::kDriftlessAffine)
    throw SchemaError("/system", "sr-distance needs a driftless system");
  const Vec from = field::find(p, "from") ? point(p, "from", d) : Vec(Vec::Zero(d));
  const bool has_to = field::find(p, "to") != nullptr;
  const Vec to = has_to ? point(p, "to", d) : Vec(Vec::Zero(d));
  const bool want_field = field::boolean(p, "field", kParams, false);
  const int directions = positive_int(p, "directions", 32);
  const SrOptions options = sr_options(p, c.config.seed);
  if (!has_to && !want_field) throw SchemaError(kParams + "/to", "give a target point, or set field to true");
  if (want_field) c.grid();
  std::vector<std::string> steps;
  if (has_to) steps.push_back("minimize energy between the two points (" + std::to_string(options.restarts) + " restarts)");
  if (want_field) steps.push_back("distance field from the start point on the grid");
  if (c.plan(steps)) return;

  if (has_to) {
    const SrEstimate est = sr_estimate(sys, from, to, options);
    c.summary.set("sr.energy", est.energy);
    c.summary.set("sr.distance", est.distance);
    c.summary.set("sr.endpoint_residual", est.endpoint_residual);
    c.summary.set("sr.euclidean", (to - from).norm());
    auto out = c.open("sr_trajectory.csv");
    const Trajectory& tr = est.trajectory;
    out << "t,";
    write_points_header(out, "x_", d);
    for (int j = 1; j <= sys.control_dimension(); ++j) out << "u_" << j << (j == sys.control_dimension() ? "" : ",");
    out << '\n';
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      out << number_text(tr.times[k]) << ',';
      write_point(out, tr.states.col(static_cast<Eigen::Index>(k)));
      // The last row repeats the final control so every row is complete.
      const auto col = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), tr.controls.cols() - 1);
      for (Eigen::Index j = 0; j < tr.controls.rows(); ++j)
        out << number_text(tr.controls(j, col)) << (j + 1 == tr.controls.rows() ? "" : ",");
      out << '\n';
    }
  }
  if (want_field) {
    const ValueField f = sr_distance_field(sys, from, c.grid(), c.solver(), directions);
    c.summary.set("sr_field.max", f.max());
    if (has_to) c.summary.set("sr_field.at_to", f.interpolate(to));
    c.field("sr_distance_field", f);
  }
}

void task_ball_box(Context& c) {
  const Json& p = c.params();
  field::only(p, {"radius", "pairs", "restarts", "intervals", "direction", "chow_samples", "max_degree"}, kParams);
  const ControlSystem& sys = c.system();
  if (sys.kind() != SystemKind::kDriftlessAffine) throw SchemaError("/system", "ball-box needs a driftless system");
  const double radius = positive_number(p, "radius", 1.0);
  const int pairs = positive_int(p, "pairs", 64);
  BallBoxOptions options;
  options.sr = sr_options(p, c.config.seed);
  options.chow_samples = positive_int(p, "chow_samples", options.chow_samples);
  options.max_degree = positive_int(p, "max_degree", options.max_degree);
  if (field::find(p, "direction")) {
    Vec dir = point(p, "direction", sys.dimension());
    if (!(dir.norm() > 0.0)) throw SchemaError(kParams + "/direction", "must be nonzero");
    options.direction = dir / dir.norm();
  }
  if (c.plan({std::to_string(pairs) + " pairs in B_" + label(radius) + ", " + std::to_string(options.sr.restarts) +
              " restarts each; fit the two-sided bound"}))
    return;
  const BallBoxReport r = ball_box_audit(sys, radius, pairs, c.config.seed, options);
  c.summary.set("ballbox.radius", r.compact_radius);
  c.summary.set("ballbox.degree", r.degree);
  c.summary.set("ballbox.c1", r.c1);
  c.summary.set("ballbox.c2", r.c2);
  c.summary.set("ballbox.fitted_exponent", r.fitted_exponent);
  c.summary.set("ballbox.worst_violation", r.worst_violation);
  c.summary.set("ballbox.pairs", static_cast<int>(r.pairs.size()));
  auto out = c.open("ballbox_pairs.csv");
  write_points_header(out, "x_", sys.dimension());
  write_points_header(out, "y_", sys.dimension());
  out << "euclidean,distance\n";
  for (const auto& pr : r.pairs) {
    write_point(out, pr.x);
    write_point(out, pr.y);
    out << number_text(pr.euclidean) << ',' << number_text(pr.distance) << '\n';
  }
}

std::vector<Vec> probe_points(const Json& p, int d) {
  const double radius = positive_number(p, "probe_radius", 1.0);
  if (!field::find(p, "probes")) return default_probes(d, radius);
  auto probes = field::points(p, "probes", kParams);
  if (probes.empty()) throw SchemaError(kParams + "/probes", "must not be empty");
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (probes[i].size() != d)
      throw SchemaError(kParams + "/probes/" + std::to_string(i), "expected " + std::to_string(d) + " coordinates");
  return probes;
}

void task_ergodic_estimate(Context& c) {
  const Json& p = c.params();
  field::only(p, {"T_list", "lambda_list", "probes", "probe_radius", "box_half_width", "samples"}, kParams);
  const auto horizons = positive_list(p, "T_list", {5.0, 10.0, 20.0});
  const auto lambdas = decreasing_lambdas(p, {0.2, 0.1, 0.05});
  const double box = positive_number(p, "box_half_width", 2.0);
  const int samples = positive_int(p, "samples", 20000);
  const Lagrangian& lag = c.lagrangian();
  const Grid& grid = c.grid();
  ErgodicEstimate est;
  est.probes = probe_points(p, c.system().dimension());
  if (c.plan({"closed-form critical value (min of L)", "V_T/T at " + std::to_string(est.probes.size()) +
                                                             " probes for T in {" + join_labels(horizons) + "}",
              "lambda v_lambda at the probes for lambda in {" + join_labels(lambdas) + "}",
              "Tauberian gaps for matched lambda T = 1"}))
    return;
  est.closed_form = mane_closed_form(lag, box, samples, c.config.seed);
  const FiniteHorizonResult run = solve_finite_horizon(c.system(), lag, grid, horizons, c.solver());
  est.horizon = horizon_series(run, est.probes);
  const DiscountedSequence seq = solve_discounted_sequence(c.system(), lag, grid, lambdas, c.solver());
  est.discounted = discounted_series(seq, est.probes);

  auto out = c.open("ergodic_estimate.csv");
  out << "route,parameter,probe,";
  write_points_header(out, "x_", c.system().dimension());
  out << "value\n";
  auto emit = [&](const char* route, const std::vector<ProbeSeries>& series) {
    for (const auto& s : series)
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        out << route << ',' << number_text(s.parameter) << ',' << i << ',';
        write_point(out, est.probes[i]);
        out << number_text(s.values[i]) << '\n';
      }
  };
  emit("horizon", est.horizon);
  emit("discounted", est.discounted);

  auto mean = [](const ProbeSeries& s) {
    double sum = 0.0;
    for (double v : s.values) sum += v;
    return sum / static_cast<double>(s.values.size());
  };
  c.summary.set("mane.closed_form", *est.closed_form);
  c.summary.set("mane.horizon", mean(est.horizon.back()));
  c.summary.set("mane.discounted", mean(est.discounted.back()));
  for (const auto& s : est.horizon) {
    c.summary.set("horizon.T" + label(s.parameter) + ".sup", s.sup());
    c.summary.set("horizon.T" + label(s.parameter) + ".inf", s.inf());
  }
  for (const auto& s : est.discounted) {
    c.summary.set("discounted.L" + label(s.parameter) + ".sup", s.sup());
    c.summary.set("discounted.L" + label(s.parameter) + ".inf", s.inf());
  }
  // V_T/T nonincreasing in T at every probe, for increasing T lists.
  bool monotone = true;
  for (std::size_t k = 1; k < est.horizon.size(); ++k)
    for (std::size_t i = 0; i < est.probes.size(); ++i)
      if (est.horizon[k].parameter > est.horizon[k - 1].parameter &&
          est.horizon[k].values[i] > est.horizon[k - 1].values[i] + c.solver().tolerance)
        monotone = false;
  c.summary.set("horizon.nonincreasing", monotone);
  c.summary.set("horizon.boundary_fraction", run.boundary_fraction);

  const auto gaps = tauberian_gaps(est);
  if (!gaps.empty()) {
    auto tout = c.open("tauberian.csv");
    tout << "T,lambda,gap\n";
    double worst = 0.0;
    bool shrinking = true;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      tout << number_text(gaps[i].horizon) << ',' << number_text(gaps[i].lambda) << ',' << number_text(gaps[i].gap)
           << '\n';
      c.summary.set("tauberian.T" + label(gaps[i].horizon) + ".gap", gaps[i].gap);
      worst = std::max(worst, gaps[i].gap);
      if (i > 0 && gaps[i].gap > gaps[i - 1].gap) shrinking = false;
    }
    c.summary.set("tauberian.max_gap", worst);
    c.summary.set("tauberian.nonincreasing", shrinking);
  }
}

struct CorrectorParams {
  std::vector<double> lambdas;
  CorrectorOptions options;
  DominationOptions domination;
};

const std::vector<std::string> kCorrectorKeys{"lambda_list",  "lipschitz_pairs", "sample_radius",
                                              "box_half_width", "restarts",     "intervals",
                                              "domination_trajectories", "domination_tolerance"};

CorrectorParams corrector_params(const Json& p, std::uint64_t seed) {
  CorrectorParams cp;
  cp.lambdas = decreasing_lambdas(p, {0.4, 0.2, 0.1, 0.05});
  cp.options.lipschitz_pairs = field::integer(p, "lipschitz_pairs", kParams, 8);
  if (cp.options.lipschitz_pairs < 0) throw SchemaError(kParams + "/lipschitz_pairs", "must be nonnegative");
  cp.options.sample_radius = positive_number(p, "sample_radius", 1.0);
  cp.options.box_half_width = positive_number(p, "box_half_width", 2.0);
  cp.options.sr = sr_options(p, seed);
  cp.options.seed = seed;
  cp.domination.trajectories = field::integer(p, "domination_trajectories", kParams, 200);
  if (cp.domination.trajectories < 0)
    throw SchemaError(kParams + "/domination_trajectories", "must be nonnegative");
  cp.domination.tolerance = positive_number(p, "domination_tolerance", 1e-3);
  cp.domination.seed = seed + 7;
  return cp;
}

void report_domination(Context& c, const std::string& prefix, const Lagrangian& lag, const ValueField& f,
                       const DominationOptions& options) {
  if (options.trajectories == 0) return;
  const DominationReport r = domination_check(c.system(), lag, f, options);
  c.summary.set(prefix + ".domination.trajectories", r.trajectories);
  c.summary.set(prefix + ".domination.violations", r.violations);
  c.summary.set(prefix + ".domination.worst", r.worst);
}

void task_corrector(Context& c) {
  const Json& p = c.params();
  field::only(p, kCorrectorKeys, kParams);
  const CorrectorParams cp = corrector_params(p, c.config.seed);
  const Lagrangian& lag = c.lagrangian();
  const Grid& grid = c.grid();
  if (c.plan({"normalize L by its minimum", "v_lambda for lambda in {" + join_labels(cp.lambdas) + "} (warm-started)",
              "chi = v at the smallest lambda; Cauchy gaps, Lipschitz samples, domination check"}))
    return;
  const CorrectorExtraction ex = extract_corrector(c.system(), lag, grid, cp.lambdas, c.solver(), cp.options);
  const Lagrangian normal = ex.mane_shift == 0.0 ? lag : lag.shifted(-ex.mane_shift);
  c.field("chi", ex.chi);
  c.summary.set("corrector.mane_shift", ex.mane_shift);
  c.summary.set("chi.min", ex.chi.min());
  c.summary.set("chi.max", ex.chi.max());
  c.summary.set("chi.at_x_star", ex.chi.interpolate(lag.x_star()));
  {
    auto out = c.open("cauchy.csv");
    out << "lambda_from,lambda_to,gap\n";
    for (std::size_t i = 0; i < ex.cauchy_gaps.size(); ++i) {
      out << number_text(cp.lambdas[i]) << ',' << number_text(cp.lambdas[i + 1]) << ','
          << number_text(ex.cauchy_gaps[i]) << '\n';
      c.summary.set("cauchy.L" + label(cp.lambdas[i + 1]) + ".gap", ex.cauchy_gaps[i]);
    }
  }
  c.summary.set("cauchy.trend", ex.cauchy_trend);
  if (!ex.lipschitz_samples.empty()) {
    auto out = c.open("lipschitz.csv");
    const int d = c.system().dimension();
    write_points_header(out, "x_", d);
    write_points_header(out, "y_", d);
    out << "difference,sr_distance,euclidean\n";
    for (const auto& s : ex.lipschitz_samples) {
      write_point(out, s.x);
      write_point(out, s.y);
      out << number_text(s.difference) << ',' << number_text(s.sr_distance) << ',' << number_text(s.euclidean)
          << '\n';
    }
    c.summary.set("chi.sr_lipschitz", ex.sr_lipschitz);
    c.summary.set("chi.holder_constant", ex.holder_constant);
    c.summary.set("chi.degree", ex.degree);
  }
  if (c.system().kind() == SystemKind::kDriftlessAffine)
    c.summary.set("chi.scheme_residual", scheme_residual(c.system(), normal, ex.chi, c.solver()).sup);
  report_domination(c, "chi", normal, ex.chi, cp.domination);
}

void task_lax_oleinik(Context& c) {
  const Json& p = c.params();
  auto keys = kCorrectorKeys;
  for (const char* k : {"chi_file", "t_step", "max_time", "tolerance", "monotone_slack", "radius", "accelerate_after"})
    keys.emplace_back(k);
  field::only(p, keys, kParams);
  const CorrectorParams cp = corrector_params(p, c.config.seed);
  FixedPointOptions fo;
  fo.t_step = positive_number(p, "t_step", fo.t_step);
  fo.max_time = positive_number(p, "max_time", fo.max_time);
  fo.tolerance = positive_number(p, "tolerance", fo.tolerance);
  fo.monotone_slack = field::number(p, "monotone_slack", kParams, fo.monotone_slack);
  fo.radius = positive_number(p, "radius", fo.radius);
  fo.accelerate_after = field::number(p, "accelerate_after", kParams, fo.accelerate_after);
  const std::string chi_file = field::string(p, "chi_file", kParams, std::string());
  const Lagrangian& lag = c.lagrangian();
  const Grid& grid = c.grid();
  if (c.system().kind() != SystemKind::kDriftlessAffine)
    throw SchemaError("/system", "lax-oleinik needs a driftless system");
  if (c.plan({chi_file.empty() ? "corrector chi from v_lambda, lambda in {" + join_labels(cp.lambdas) + "}"
                               : "corrector chi read from " + chi_file,
              "iterate T_" + label(fo.t_step) + " until the change is below " + label(fo.tolerance) +
                  " (at most t = " + label(fo.max_time) + ")",
              "domination check and scheme residual of the limit"}))
    return;

  ValueField chi;
  Lagrangian normal = lag;
  if (chi_file.empty()) {
    CorrectorOptions options = cp.options;
    options.lipschitz_pairs = 0;
    CorrectorExtraction ex = extract_corrector(c.system(), lag, grid, cp.lambdas, c.solver(), options);
    if (ex.mane_shift != 0.0) normal = lag.shifted(-ex.mane_shift);
    chi = std::move(ex.chi);
  } else {
    std::ifstream in(chi_file, std::ios::binary);
    if (!in) throw SchemaError(kParams + "/chi_file", "cannot open " + chi_file);
    chi = read_field_binary(in);
    if (!(chi.grid() == grid)) throw SchemaError(kParams + "/chi_file", "field lives on a different grid");
    normal = normalized(lag, cp.options.box_half_width, 20000, c.config.seed);
  }
  const FixedPointResult r = lax_oleinik_fixed_point(c.system(), normal, chi, c.solver(), fo);
  c.field("chi_bar", r.chi_bar);
  {
    auto out = c.open("semigroup.csv");
    out << "t,change,decrease,sup_on_ball,modulus\n";
    for (std::size_t i = 0; i < r.changes.size(); ++i) {
      out << number_text(r.times[i]) << ',' << number_text(r.changes[i]) << ',' << number_text(r.decreases[i]) << ','
          << number_text(r.sup_on_ball[i]) << ',' << number_text(r.modulus[i]) << '\n';
    }
  }
  double below = 0.0;
  for (std::size_t n = 0; n < grid.size(); ++n) below = std::max(below, chi[n] - r.chi_bar[n]);
  c.summary.set("lo.fixed_point_gap", r.fixed_point_gap);
  c.summary.set("lo.converged", r.converged);
  c.summary.set("lo.iterations", r.iterations);
  c.summary.set("lo.worst_decrease", r.worst_decrease);
  c.summary.set("lo.accelerated_at", r.accelerated_at);
  c.summary.set("lo.policy_iterations", r.policy_iterations);
  c.summary.set("chi_bar.min", r.chi_bar.min());
  c.summary.set("chi_bar.max", r.chi_bar.max());
  c.summary.set("chi_bar.below_chi", below);
  c.summary.set("chi_bar.scheme_residual", scheme_residual(c.system(), normal, r.chi_bar, c.solver()).sup);
  report_domination(c, "chi_bar", normal, r.chi_bar, cp.domination);
}

void task_list_benchmarks(Context& c) {
  field::only(c.params(), {}, kParams);
  if (c.plan({"print the built-in scenarios"})) return;
  auto out = c.open("benchmarks.csv");
  out << "name,anchor,description\n";
  for (const auto& b : list_benchmarks()) {
    c.log << b.name << "  (" << b.anchor << ")\n    " << b.description << '\n';
    out << b.name << ",\"" << b.anchor << "\",\"" << b.description << "\"\n";
  }
  c.summary.set("benchmarks.count", static_cast<int>(list_benchmarks().size()));
}

void dispatch(Context& c) {
  const std::string& t = c.config.task;
  if (t == "validate") return task_validate(c);
  if (t == "solve-vt") return task_solve_vt(c);
  if (t == "solve-discounted") return task_solve_discounted(c);
  if (t == "sr-distance") return task_sr_distance(c);
  if (t == "ball-box") return task_ball_box(c);
  if (t == "ergodic-estimate") return task_ergodic_estimate(c);
  if (t == "corrector") return task_corrector(c);
  if (t == "lax-oleinik") return task_lax_oleinik(c);
  if (t == "list-benchmarks") return task_list_benchmarks(c);
  throw SchemaError("/task", "unknown task '" + t + "'");
}

RunOutcome fail(int code, const std::string& message, std::ostream& log) {
  RunOutcome o;
  o.exit_code = code;
  o.message = message;
  log << "error: " << message << '\n';
  return o;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, bool dry_run, std::ostream& log) {
  Context c{config, std::nullopt, {}, {}, log, dry_run, {}};
  try {
    if (config.task != "list-benchmarks") c.scenario = build_scenario(config);
    if (!dry_run) std::filesystem::create_directories(config.output_dir);
    dispatch(c);
  } catch (const SchemaError& e) {
    return fail(kExitSchemaError, e.what(), log);
  } catch (const ModeError& e) {
    return fail(kExitSchemaError, e.what(), log);
  } catch (const DivergenceError& e) {
    return fail(kExitDivergence, std::string("divergence: ") + e.what(), log);
  } catch (const IterationLimitError& e) {
    return fail(kExitDivergence, std::string("iteration limit: ") + e.what(), log);
  } catch (const ConvergenceError& e) {
    return fail(kExitDivergence, std::string("no convergence: ") + e.what(), log);
  } catch (const ConsistencyError& e) {
    return fail(kExitDivergence, std::string("inconsistent scheme: ") + e.what(), log);
  } catch (const InputError& e) {
    return fail(kExitSchemaError, e.what(), log);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitSchemaError, e.what(), log);
  }

  RunOutcome o;
  o.summary = std::move(c.summary);
  if (dry_run) return o;

  bool passed = true;
  for (const auto& [key, ok] : c.checks) passed = passed && ok;
  for (const auto& a : config.assertions) {
    const auto v = o.summary.number(a.key);
    const bool ok = v && (!a.min || *v >= *a.min) && (!a.max || *v <= *a.max);
    o.summary.set("assert." + a.key, ok ? "pass" : "fail");
    if (a.min) o.summary.set("assert." + a.key + ".min", *a.min);
    if (a.max) o.summary.set("assert." + a.key + ".max", *a.max);
    if (!ok) {
      passed = false;
      log << "assertion failed: " << a.key << " = " << (v ? number_text(*v) : std::string("<missing>")) << '\n';
    }
  }
  o.summary.set("status", passed ? "pass" : "fail");
  o.exit_code = passed ? kExitOk : kExitAssertionFailed;

  try {
    {
      auto out = c.open("summary.txt");
      o.summary.write(out);
    }
    auto out = c.open("config.json");
    out << to_json(config).dump(2) << '\n';
  } catch (const InputError& e) {
    return fail(kExitSchemaError, e.what(), log);
  }
  o.files = std::move(c.files);
  return o;
}

RunOutcome run_experiment_text(const std::string& json_text, bool dry_run, std::ostream& log) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    return fail(kExitSchemaError, std::string("config is not valid JSON: ") + e.what(), log);
  }
  ExperimentConfig config;
  try {
    config = parse_experiment(j);
  } catch (const InputError& e) {
    return fail(kExitSchemaError, e.what(), log);
  }
  return run_experiment(config, dry_run, log);
}

}  // namespace ergodic_hjb
