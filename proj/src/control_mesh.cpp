#include "ergodic_hjb/control_mesh.hpp"

#include <cmath>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

ControlMesh build_control_mesh(int m, const ControlMeshSpec& spec, const Vec& center,
                               const std::vector<Vec>& extra) {
  if (m < 1) throw InputError("control dimension must be positive");
  if (spec.points_per_axis < 1) throw InputError("control mesh needs at least one point per axis");
  if (!(spec.radius >= 0.0)) throw InputError("control mesh radius must be nonnegative");
  if (center.size() != m) throw InputError("control mesh center dimension mismatch");

  ControlMesh mesh;
  mesh.m = m;
  const int n = spec.points_per_axis;
  const double step = n > 1 ? 2.0 * spec.radius / (n - 1) : 0.0;
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  std::vector<double> u(static_cast<std::size_t>(m));
  for (;;) {
    double r2 = 0.0;
    for (int i = 0; i < m; ++i) {
      // Offsets are step * (i - (n-1)/2), exactly antisymmetric under i -> n-1-i.
      double offset = n > 1 ? step * (idx[static_cast<std::size_t>(i)] - 0.5 * (n - 1)) : 0.0;
      u[static_cast<std::size_t>(i)] = center(i) + offset;
      r2 += offset * offset;
    }
    // Small slack so axis endpoints of the ball survive rounding.
    if (!spec.ball || r2 <= spec.radius * spec.radius * (1.0 + 1e-12))
      mesh.points.insert(mesh.points.end(), u.begin(), u.end());
    int axis = 0;
    while (axis < m && ++idx[static_cast<std::size_t>(axis)] == n) idx[static_cast<std::size_t>(axis++)] = 0;
    if (axis == m) break;
  }
  for (const auto& e : extra) {
    if (e.size() != m) throw InputError("extra control dimension mismatch");
    mesh.points.insert(mesh.points.end(), e.data(), e.data() + m);
  }
  return mesh;
}

}  // namespace ergodic_hjb
