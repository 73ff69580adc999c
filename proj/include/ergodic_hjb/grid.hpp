#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ergodic_hjb/systems.hpp"

namespace ergodic_hjb {

/// How interpolation treats points outside the box.
enum class BoundaryRule {
  kExtendLinear,  // extrapolate from the boundary cell
  kClamp,         // project onto the box first (monotone)
};

std::string to_string(BoundaryRule rule);
BoundaryRule boundary_rule_from_string(const std::string& s);

/// Uniform rectangular grid. Node (i_0, ..., i_{d-1}) has flat index
/// sum_k i_k * stride_k with the last axis varying fastest (row-major).
class Grid {
 public:
  Grid() = default;
  /// Throws InputError unless every axis has at least 3 nodes and upper > lower.
  Grid(std::vector<double> lower, std::vector<double> upper, std::vector<int> nodes);
  /// Square box [-half_width, half_width]^d with n nodes per axis.
  static Grid cube(int d, double half_width, int n);

  int dimension() const { return static_cast<int>(nodes_.size()); }
  std::size_t size() const { return size_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<int>& nodes() const { return nodes_; }
  const std::vector<double>& spacing() const { return spacing_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  double min_spacing() const;

  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  Vec node(std::size_t flat) const;
  void node_into(std::size_t flat, double* out) const;
  bool contains(const Vec& x, double slack = 0.0) const;
  /// True when the node has a neighbour on both sides along every axis.
  bool is_interior(std::size_t flat) const;
  /// Nearest node (coordinates clamped to the box).
  std::size_t nearest(const Vec& x) const;

  bool operator==(const Grid& other) const;

 private:
  std::vector<double> lower_, upper_, spacing_;
  std::vector<int> nodes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Scalar field sampled on a grid with multilinear interpolation.
class ValueField {
 public:
  ValueField() = default;
  ValueField(Grid grid, double fill = 0.0);
  ValueField(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double interpolate(const Vec& x, BoundaryRule rule = BoundaryRule::kExtendLinear) const;
  double interpolate(const double* x, BoundaryRule rule) const;

  bool all_finite() const;
  double max() const;
  double min() const;
  /// sup |a - b| over nodes; grids must match.
  friend double sup_distance(const ValueField& a, const ValueField& b);

  ValueField operator+(double c) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// CSV with columns x_1..x_d,value; one row per node in flat-index order.
void write_field_csv(std::ostream& out, const ValueField& field);

/// Binary layout (little-endian):
///   char[8]  magic "EHJBVF01"
///   uint32   d
///   uint32   nodes per axis (d entries)
///   float64  lower corner (d entries)
///   float64  upper corner (d entries)
///   float64  values in flat-index (row-major) order
void write_field_binary(std::ostream& out, const ValueField& field);
ValueField read_field_binary(std::istream& in);

}  // namespace ergodic_hjb
