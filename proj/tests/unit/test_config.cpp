#include <doctest.h>

#include <string>

#include "ergodic_hjb/benchmarks.hpp"
#include "ergodic_hjb/config.hpp"
#include "ergodic_hjb/errors.hpp"

using namespace ergodic_hjb;

namespace {

Json minimal(const std::string& task = "validate") {
  return Json{{"schema_version", 1}, {"task", task}, {"benchmark", "grushin-quadratic"}};
}

// Path of the SchemaError thrown by `fn`, or "" if none.
template <typename F>
std::string error_path(F&& fn) {
  try {
    fn();
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "";
}

template <typename F>
std::string error_text(F&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("benchmark catalog") {
  const auto& all = list_benchmarks();
  REQUIRE(all.size() == 5);
  std::vector<std::string> names;
  for (const auto& b : all) names.push_back(b.name);
  CHECK(names == std::vector<std::string>{"grushin-quadratic", "heisenberg-quadratic", "euclidean-sanity",
                                          "double-integrator", "harmonic-oscillator"});
  CHECK(find_benchmark("double-integrator").anchor == "Control of acceleration");
  CHECK(find_benchmark("harmonic-oscillator").anchor == "Controlled harmonic oscillator");
  CHECK(&list_benchmarks() == &all);
  CHECK_THROWS_AS(find_benchmark("nope"), InputError);
  CHECK(error_text([] { find_benchmark("nope"); }).find("grushin-quadratic") != std::string::npos);
}

TEST_CASE("every benchmark builds") {
  for (const auto& b : list_benchmarks()) {
    INFO(b.name);
    ExperimentConfig c = parse_experiment(Json{{"schema_version", 1}, {"task", "validate"}, {"benchmark", b.name}});
    Scenario s = build_scenario(c);
    CHECK(s.lagrangian.has_value());
    CHECK(s.grid.has_value());
    CHECK(s.grid->dimension() == s.system.dimension());
    CHECK(s.solver.dt > 0.0);
  }
}

TEST_CASE("system sections") {
  CHECK(system_from_json(Json{{"kind", "heisenberg"}}).dimension() == 3);
  CHECK(system_from_json(Json{{"kind", "grushin"}, {"phi", "x^2"}}).name() == "grushin");
  CHECK(system_from_json(Json{{"kind", "euclidean"}, {"dimension", 4}}).control_dimension() == 4);
  auto lin = system_from_json(Json{{"kind", "linear"}, {"A", {{0, 1}, {-1, 0}}}, {"B", {{0}, {1}}}});
  CHECK(lin.kind() == SystemKind::kLinear);
  CHECK(system_from_json(Json{{"kind", "double_integrator"}}).dimension() == 2);

  CHECK(error_path([] { system_from_json(Json{{"kind", "torus"}}); }) == "/system/kind");
  CHECK(error_text([] { system_from_json(Json{{"kind", "torus"}}); }).find("heisenberg") != std::string::npos);
  CHECK(error_path([] { system_from_json(Json{{"kind", "grushin"}, {"phi", "1/x"}}); }) == "/system/phi");
  CHECK(error_path([] { system_from_json(Json{{"kind", "grushin"}, {"phi", "x"}, {"c_f", -1}}); }) ==
        "/system/c_f");
  CHECK(error_path([] { system_from_json(Json{{"kind", "euclidean"}, {"dimension", 0}}); }) ==
        "/system/dimension");
  CHECK(error_path([] { system_from_json(Json{{"kind", "heisenberg"}, {"extra", 1}}); }) == "/system/extra");
  CHECK(error_path([] {
          system_from_json(Json{{"kind", "linear"}, {"A", {{0, 1}, {0, 0}}}, {"B", {{0}, {1}, {2}}}});
        }).rfind("/system", 0) == 0);
}

TEST_CASE("lagrangian sections") {
  auto sys = system_from_json(Json{{"kind", "grushin"}, {"phi", "x"}});
  auto l = lagrangian_from_json(find_benchmark("grushin-quadratic").lagrangian, sys);
  CHECK(l.constants().beta(2.0) == doctest::Approx(4.5));
  CHECK(l.constants().normalized);

  Json tabled = find_benchmark("grushin-quadratic").lagrangian;
  tabled["beta"] = Json{{1.0, 2.0}, {3.0, 10.0}};
  CHECK(lagrangian_from_json(tabled, sys).constants().beta(2.0) == 10.0);

  auto c = lagrangian_from_json(Json{{"kind", "constant"}, {"value", 1.5}}, sys);
  CHECK(c.eval(Vec::Zero(2), Vec::Ones(2)) == 1.5);

  Json bad = find_benchmark("grushin-quadratic").lagrangian;
  bad["ell1"] = 0.0;
  CHECK(error_path([&] { lagrangian_from_json(bad, sys); }) == "/lagrangian/ell1");
  bad = find_benchmark("grushin-quadratic").lagrangian;
  bad["u_star"] = Json{0.0};
  CHECK(error_path([&] { lagrangian_from_json(bad, sys); }) == "/lagrangian/u_star");
  bad = find_benchmark("grushin-quadratic").lagrangian;
  bad["g"] = "x^";
  CHECK(error_path([&] { lagrangian_from_json(bad, sys); }) == "/lagrangian/g");
}

TEST_CASE("grid sections") {
  auto g = grid_from_json(Json{{"half_width", 1.5}, {"nodes", 11}}, 2);
  CHECK(g.size() == 121);
  CHECK(g.lower()[0] == -1.5);
  auto h = grid_from_json(Json{{"lower", {0, 0}}, {"upper", {1, 2}}, {"nodes", {5, 7}}}, 2);
  CHECK(h.nodes() == std::vector<int>{5, 7});

  CHECK(error_path([] { grid_from_json(Json{{"half_width", 1.0}, {"nodes", 2}}, 2); }) == "/grid/nodes/0");
  CHECK(error_text([] { grid_from_json(Json{{"half_width", 1.0}, {"nodes", {5, 2}}}, 2); })
            .find("at least 3 nodes per axis") != std::string::npos);
  CHECK(error_path([] { grid_from_json(Json{{"half_width", 1.0}, {"nodes", {5, 5, 5}}}, 2); }) ==
        "/grid/nodes");
  CHECK(error_path([] { grid_from_json(Json{{"lower", {1, 0}}, {"upper", {0, 1}}, {"nodes", 5}}, 2); })
            .rfind("/grid", 0) == 0);
  CHECK(error_path([] { grid_from_json(Json{{"half_width", 1.0}, {"lower", {0, 0}}, {"nodes", 5}}, 2); })
            .rfind("/grid", 0) == 0);
}

TEST_CASE("solver sections") {
  auto s = solver_from_json(Json{{"dt", 0.02},
                                 {"mesh", {{"radius", 2.0}, {"points_per_axis", 9}, {"ball", false}}},
                                 {"boundary", "clamp"},
                                 {"tolerance", 1e-5},
                                 {"max_iterations", 100}});
  CHECK(s.dt == 0.02);
  CHECK(s.mesh.points_per_axis == 9);
  CHECK_FALSE(s.mesh.ball);
  CHECK(s.boundary == BoundaryRule::kClamp);
  CHECK(s.max_iterations == 100);
  CHECK(solver_from_json(Json::object()).dt == 0.0);
  CHECK(error_path([] { solver_from_json(Json{{"tolerance", 0}}); }) == "/solver/tolerance");
  CHECK(error_path([] { solver_from_json(Json{{"dt", -1}}); }) == "/solver/dt");
  CHECK(error_path([] { solver_from_json(Json{{"boundary", "wrap"}}); }) == "/solver/boundary");
  CHECK(error_path([] { solver_from_json(Json{{"mesh", {{"points_per_axis", 1}}}}); }) ==
        "/solver/mesh/points_per_axis");
}

TEST_CASE("top-level document") {
  auto c = parse_experiment(minimal());
  CHECK(c.task == "validate");
  CHECK(c.output_dir == ".");
  CHECK(c.seed == 0);
  CHECK(c.threads == 1);
  CHECK(task_names().size() == 9);

  auto j = minimal();
  j["schema_version"] = 2;
  CHECK(error_path([&] { parse_experiment(j); }) == "/schema_version");
  j = minimal("fly");
  CHECK(error_path([&] { parse_experiment(j); }) == "/task");
  j = minimal();
  j["benchmark"] = "missing";
  CHECK(error_path([&] { parse_experiment(j); }) == "/benchmark");
  j = minimal();
  j["colour"] = "blue";
  CHECK(error_path([&] { parse_experiment(j); }) == "/colour");
  j = minimal();
  j["seed"] = -3;
  CHECK(error_path([&] { parse_experiment(j); }) == "/seed");
  j = minimal();
  j["grid"] = 5;
  CHECK(error_path([&] { parse_experiment(j); }) == "/grid");
  j = minimal();
  j["assertions"] = Json{{{"min", 0}}};
  CHECK(error_path([&] { parse_experiment(j); }).rfind("/assertions/0", 0) == 0);
  CHECK_THROWS_AS(parse_experiment(Json::array()), SchemaError);
}

TEST_CASE("config sections overlay the benchmark") {
  auto j = minimal();
  j["grid"] = Json{{"nodes", 21}};
  auto s = build_scenario(parse_experiment(j));
  CHECK(s.grid->nodes() == std::vector<int>{21, 21});
  CHECK(s.grid->lower()[0] == -2.0);

  // Another bounds form or another kind replaces the section.
  j["grid"] = Json{{"half_width", 1.0}, {"nodes", 11}};
  CHECK(build_scenario(parse_experiment(j)).grid->upper()[1] == 1.0);
  j["lagrangian"] = Json{{"kind", "constant"}, {"value", 2.0}};
  CHECK(build_scenario(parse_experiment(j)).lagrangian->eval(Vec::Ones(2), Vec::Ones(2)) == 2.0);

  j = minimal();
  j["solver"] = Json{{"tolerance", 1e-3}};
  j["threads"] = 2;
  auto t = build_scenario(parse_experiment(j));
  CHECK(t.solver.tolerance == 1e-3);
  CHECK(t.solver.dt == 0.01);
  CHECK(t.solver.threads == 2);

  auto none = parse_experiment(Json{{"schema_version", 1}, {"task", "validate"}});
  CHECK(error_path([&] { build_scenario(none); }) == "/system");
}

TEST_CASE("resolved config round trip") {
  auto j = minimal("solve-vt");
  j["params"] = Json{{"T_list", {1, 2}}};
  j["seed"] = 42;
  j["assertions"] = Json{{{"key", "vt.steps"}, {"min", 1}}};
  auto c = parse_experiment(j);
  auto back = parse_experiment(to_json(c));
  CHECK(back.task == c.task);
  CHECK(back.seed == 42);
  CHECK(back.params == c.params);
  REQUIRE(back.assertions.size() == 1);
  CHECK(back.assertions[0].key == "vt.steps");
  CHECK(back.assertions[0].min == 1.0);
  CHECK_FALSE(back.assertions[0].max.has_value());
}
