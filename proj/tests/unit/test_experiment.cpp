#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ergodic_hjb/experiment.hpp"

using namespace ergodic_hjb;
namespace fs = std::filesystem;

namespace {

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("ehjb_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunOutcome run(Json doc, const std::string& dir, bool dry_run = false) {
  doc["schema_version"] = 1;
  doc["output_dir"] = dir;
  std::ostringstream log;
  auto o = run_experiment_text(doc.dump(), dry_run, log);
  INFO(log.str());
  return o;
}

Json small_estimate() {
  return Json{{"task", "ergodic-estimate"},
              {"benchmark", "euclidean-sanity"},
              {"lagrangian", {{"kind", "constant"}, {"value", 1.0}}},
              {"grid", {{"half_width", 1.0}, {"nodes", 11}}},
              {"solver", {{"dt", 0.1}}},
              {"params", {{"T_list", {1, 2}}, {"lambda_list", {1.0, 0.5}}, {"samples", 500}}}};
}

}  // namespace

TEST_CASE("summary formatting") {
  Summary s;
  s.set("a", 0.1);
  s.set("b", 3);
  s.set("c", true);
  s.set("d", "text");
  s.set("a", 2.5);  // overwrite keeps the position
  std::ostringstream out;
  s.write(out);
  CHECK(out.str() == "a=2.5\nb=3\nc=true\nd=text\n");
  CHECK(s.number("a") == 2.5);
  CHECK(s.number("c") == 1.0);
  CHECK_FALSE(s.number("d").has_value());
  CHECK_FALSE(s.number("missing").has_value());
  REQUIRE(s.text("d") != nullptr);
  CHECK(*s.text("d") == "text");

  Summary t;
  t.set("x", 0.1);
  std::ostringstream o2;
  t.write(o2);
  CHECK(std::stod(o2.str().substr(2)) == 0.1);
}

TEST_CASE("list-benchmarks writes the catalog") {
  TempDir dir;
  auto o = run(Json{{"task", "list-benchmarks"}}, dir.str());
  CHECK(o.exit_code == kExitOk);
  CHECK(o.summary.number("benchmarks.count") == 5.0);
  const std::string csv = slurp(dir.path / "benchmarks.csv");
  CHECK(csv.rfind("name,anchor,description\n", 0) == 0);
  CHECK(csv.find("double-integrator") != std::string::npos);
  CHECK(csv.find("harmonic-oscillator") != std::string::npos);
  CHECK(fs::exists(dir.path / "summary.txt"));
  CHECK(fs::exists(dir.path / "config.json"));
  CHECK(slurp(dir.path / "summary.txt").find("status=pass") != std::string::npos);
}

TEST_CASE("validate runs on every benchmark") {
  for (const char* name : {"heisenberg-quadratic", "grushin-quadratic", "euclidean-sanity", "double-integrator",
                           "harmonic-oscillator"}) {
    INFO(name);
    TempDir dir;
    auto o = run(Json{{"task", "validate"}, {"benchmark", name}}, dir.str());
    CHECK(o.exit_code == kExitOk);
    CHECK(o.summary.number("validate.passed") == 1.0);
  }
}

TEST_CASE("constant Lagrangian estimates its own value") {
  TempDir dir;
  auto o = run(small_estimate(), dir.str());
  REQUIRE(o.exit_code == kExitOk);
  CHECK(o.summary.number("mane.closed_form") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(o.summary.number("mane.horizon") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(o.summary.number("mane.discounted") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fs::exists(dir.path / "ergodic_estimate.csv"));
  CHECK(fs::exists(dir.path / "tauberian.csv"));
}

TEST_CASE("config errors exit with code 2") {
  TempDir dir;
  auto bad_grid = small_estimate();
  bad_grid["grid"] = Json{{"half_width", 2.0}, {"nodes", 2}};
  auto o = run(bad_grid, dir.str());
  CHECK(o.exit_code == kExitSchemaError);
  CHECK(o.message.find("/grid/nodes/0") != std::string::npos);
  CHECK(o.message.find("at least 3 nodes") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "summary.txt"));

  CHECK(run(Json{{"task", "fly"}}, dir.str()).exit_code == kExitSchemaError);
  auto bad_param = small_estimate();
  bad_param["params"]["typo"] = 1;
  CHECK(run(bad_param, dir.str()).exit_code == kExitSchemaError);
  // Wrong system type for the task.
  CHECK(run(Json{{"task", "ball-box"}, {"benchmark", "double-integrator"}}, dir.str()).exit_code ==
        kExitSchemaError);

  std::ostringstream log;
  CHECK(run_experiment_text("{not json", false, log).exit_code == kExitSchemaError);
  CHECK(log.str().find("error:") != std::string::npos);
}

TEST_CASE("assertions decide the exit code") {
  TempDir dir;
  auto doc = small_estimate();
  doc["assertions"] = Json{{{"key", "mane.closed_form"}, {"min", 0.99}, {"max", 1.01}}};
  auto ok = run(doc, dir.str());
  CHECK(ok.exit_code == kExitOk);
  CHECK(*ok.summary.text("assert.mane.closed_form") == "pass");

  doc["assertions"] = Json{{{"key", "mane.closed_form"}, {"max", 0.5}}};
  auto bad = run(doc, dir.str());
  CHECK(bad.exit_code == kExitAssertionFailed);
  CHECK(*bad.summary.text("status") == "fail");
  CHECK(slurp(dir.path / "summary.txt").find("assert.mane.closed_form=fail") != std::string::npos);

  doc["assertions"] = Json{{{"key", "no.such.key"}, {"min", 0}}};
  CHECK(run(doc, dir.str()).exit_code == kExitAssertionFailed);
}

TEST_CASE("dry run writes nothing") {
  TempDir dir;
  std::ostringstream log;
  Json doc = small_estimate();
  doc["schema_version"] = 1;
  doc["output_dir"] = dir.str();
  auto o = run_experiment_text(doc.dump(), true, log);
  CHECK(o.exit_code == kExitOk);
  CHECK_FALSE(fs::exists(dir.path));
  CHECK(log.str().find("closed-form") != std::string::npos);

  // Config errors are still reported.
  doc["grid"] = Json{{"nodes", 1}};
  CHECK(run_experiment_text(doc.dump(), true, log).exit_code == kExitSchemaError);
}

TEST_CASE("same seed gives identical outputs") {
  const Json doc{{"task", "ball-box"},
                 {"benchmark", "heisenberg-quadratic"},
                 {"seed", 5},
                 {"params", {{"pairs", 4}, {"restarts", 1}, {"intervals", 12}, {"chow_samples", 4}}}};
  TempDir a, b, c;
  REQUIRE(run(doc, a.str()).exit_code == kExitOk);
  REQUIRE(run(doc, b.str()).exit_code == kExitOk);
  CHECK(slurp(a.path / "ballbox_pairs.csv") == slurp(b.path / "ballbox_pairs.csv"));
  CHECK(slurp(a.path / "summary.txt") == slurp(b.path / "summary.txt"));

  Json other = doc;
  other["seed"] = 6;
  REQUIRE(run(other, c.str()).exit_code == kExitOk);
  CHECK(slurp(a.path / "ballbox_pairs.csv") != slurp(c.path / "ballbox_pairs.csv"));
}

TEST_CASE("field tasks write CSV and binary fields") {
  TempDir dir;
  Json doc{{"task", "solve-discounted"},
           {"benchmark", "grushin-quadratic"},
           {"grid", {{"nodes", 21}}},
           {"solver", {{"dt", 0.05}}},
           {"params", {{"lambda_list", {0.5, 0.25}}}}};
  auto o = run(doc, dir.str());
  REQUIRE(o.exit_code == kExitOk);
  CHECK(fs::exists(dir.path / "v_lambda0.5.csv"));
  CHECK(fs::exists(dir.path / "v_lambda0.25.bin"));
  CHECK(o.summary.number("vl.L0.25.min").value() >= -1e-9);

  TempDir vt;
  Json v{{"task", "solve-vt"},
         {"benchmark", "grushin-quadratic"},
         {"grid", {{"nodes", 21}}},
         {"solver", {{"dt", 0.05}}},
         {"params", {{"T_list", {0.5, 1}}}}};
  auto r = run(v, vt.str());
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.summary.number("vt.steps") == 20.0);
  CHECK(fs::exists(vt.path / "vt_T1.csv"));
  CHECK(r.summary.number("vt.T1.at_x_star").value() >= r.summary.number("vt.T0.5.at_x_star").value());
}

TEST_CASE("corrector and Lax-Oleinik tasks on a coarse grid") {
  TempDir dir;
  Json doc{{"task", "corrector"},
           {"benchmark", "grushin-quadratic"},
           {"grid", {{"nodes", 21}}},
           {"solver", {{"dt", 0.05}}},
           {"params",
            {{"lambda_list", {0.4, 0.2}},
             {"lipschitz_pairs", 2},
             {"restarts", 1},
             {"intervals", 12},
             {"domination_trajectories", 10}}}};
  auto o = run(doc, dir.str());
  REQUIRE(o.exit_code == kExitOk);
  CHECK(o.summary.number("chi.min").value() >= -1e-6);
  CHECK(o.summary.number("chi.domination.trajectories") == 10.0);
  CHECK(fs::exists(dir.path / "chi.bin"));

  TempDir lo;
  Json l = doc;
  l["task"] = "lax-oleinik";
  l["params"] = Json{{"chi_file", (dir.path / "chi.bin").string()}, {"domination_trajectories", 5}};
  auto r = run(l, lo.str());
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.summary.number("lo.converged") == 1.0);
  CHECK(r.summary.number("chi_bar.below_chi").value() <= 1e-6);
  CHECK(fs::exists(lo.path / "semigroup.csv"));

  Json wrong = l;
  wrong["grid"] = Json{{"nodes", 11}};
  CHECK(run(wrong, lo.str()).exit_code == kExitSchemaError);
}
