#include "ergodic_hjb/benchmarks.hpp"

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

namespace {

using nlohmann::json;

std::vector<BenchmarkInfo> build_catalog() {
  std::vector<BenchmarkInfo> c;
  c.push_back({"grushin-quadratic",
               "The classical Grushin system",
               "x' = u, y' = x v with L = 1/2|u|^2 + x^2 + y^2 on [-2,2]^2",
               {{"kind", "grushin"}, {"phi", "x"}, {"c_f", 1.0}},
               {{"kind", "quadratic_plus_potential"},
                {"g", "x^2+y^2"},
                {"u_star", {0.0, 0.0}},
                {"x_star", {0.0, 0.0}},
                {"ell1", 1.0},
                {"theta", 0.25},
                {"K_radius", 0.5},
                {"beta", "0.5+x^2"},
                {"normalized", true}},
               {{"lower", {-2.0, -2.0}}, {"upper", {2.0, 2.0}}, {"nodes", {161, 161}}},
               {{"dt", 0.01}}});
  c.push_back({"heisenberg-quadratic",
               "Heisenberg group",
               "x' = u, y' = v, z' = u y - v x with L = 1/2|u|^2 + |x|^2 on [-2,2]^3",
               {{"kind", "heisenberg"}},
               {{"kind", "quadratic_plus_potential"},
                {"g", "x^2+y^2+z^2"},
                {"u_star", {0.0, 0.0}},
                {"x_star", {0.0, 0.0, 0.0}},
                {"ell1", 1.0},
                {"theta", 0.25},
                {"K_radius", 0.5},
                {"beta", "0.5+x^2"},
                {"normalized", true}},
               {{"lower", {-2.0, -2.0, -2.0}}, {"upper", {2.0, 2.0, 2.0}}, {"nodes", {33, 33, 33}}},
               {{"dt", 0.05}}});
  c.push_back({"euclidean-sanity",
               "Euclidean sanity check",
               "x' = u in the plane with L = 1/2|u|^2 + |x|^2 (flat metric, smooth corrector)",
               {{"kind", "euclidean"}, {"dimension", 2}},
               {{"kind", "quadratic_plus_potential"},
                {"g", "x^2+y^2"},
                {"u_star", {0.0, 0.0}},
                {"x_star", {0.0, 0.0}},
                {"ell1", 1.0},
                {"theta", 0.25},
                {"K_radius", 0.5},
                {"beta", "0.5+x^2"},
                {"normalized", true}},
               {{"lower", {-2.0, -2.0}}, {"upper", {2.0, 2.0}}, {"nodes", {81, 81}}},
               {{"dt", 0.02}}});
  c.push_back({"double-integrator",
               "Control of acceleration",
               "x' = v, v' = u with L = 1/2 u^2 + 1/2 v^2 + x^2/(1+x^2) (bounded g)",
               {{"kind", "linear"}, {"A", {{0.0, 1.0}, {0.0, 0.0}}}, {"B", {{0.0}, {1.0}}}, {"c_f", 1.0}},
               {{"kind", "quadratic_plus_potential"},
                {"g", "0.5*y^2+x^2/(1+x^2)"},
                {"u_star", {0.0}},
                {"x_star", {0.0, 0.0}},
                {"ell1", 1.0},
                {"theta", 0.1},
                {"K_radius", 0.5},
                {"beta", "1+0.5*x^2"},
                {"normalized", true}},
               {{"lower", {-2.0, -2.0}}, {"upper", {2.0, 2.0}}, {"nodes", {81, 81}}},
               {{"dt", 0.02}}});
  c.push_back({"harmonic-oscillator",
               "Controlled harmonic oscillator",
               "x' = y, y' = -x + u with L = 1/2(u - 1/2)^2 + 1/2 y^2 + (x - 1/2)^2",
               {{"kind", "linear"}, {"A", {{0.0, 1.0}, {-1.0, 0.0}}}, {"B", {{0.0}, {1.0}}}, {"c_f", 1.0}},
               {{"kind", "quadratic_plus_potential"},
                {"g", "0.5*y^2+(x-0.5)^2"},
                {"u_star", {0.5}},
                {"x_star", {0.5, 0.0}},
                {"ell1", 1.0},
                {"theta", 0.25},
                {"K_radius", 1.0},
                {"beta", "1+2.5*x^2"},
                {"normalized", true}},
               {{"lower", {-2.0, -2.0}}, {"upper", {2.0, 2.0}}, {"nodes", {81, 81}}},
               {{"dt", 0.02}}});
  return c;
}

}  // namespace

const std::vector<BenchmarkInfo>& list_benchmarks() {
  static const std::vector<BenchmarkInfo> catalog = build_catalog();
  return catalog;
}

const BenchmarkInfo& find_benchmark(const std::string& name) {
  std::string known;
  for (const auto& b : list_benchmarks()) {
    if (b.name == name) return b;
    known += (known.empty() ? "" : ", ") + b.name;
  }
  throw InputError("unknown benchmark '" + name + "' (known: " + known + ")");
}

}  // namespace ergodic_hjb
