#pragma once

#include <vector>

#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

/// Finite set of controls used to approximate inf/sup over R^m.
struct ControlMeshSpec {
  double radius = 3.0;
  int points_per_axis = 21;
  /// Keep only lattice points inside the ball of `radius` (otherwise the full cube).
  bool ball = true;
};

/// Row-major list of controls; row k is control k.
struct ControlMesh {
  int m = 0;
  std::vector<double> points;  // size() * m

  int size() const { return m == 0 ? 0 : static_cast<int>(points.size()) / m; }
  const double* operator[](int k) const { return points.data() + static_cast<std::size_t>(k) * m; }
  Vec control(int k) const { return Eigen::Map<const Vec>((*this)[k], m); }
};

/// Uniform lattice centered at `center`, optionally clipped to the ball,
/// with `extra` appended last (ties resolve to the lowest index).
ControlMesh build_control_mesh(int m, const ControlMeshSpec& spec, const Vec& center,
                               const std::vector<Vec>& extra = {});

}  // namespace ergodic_hjb
