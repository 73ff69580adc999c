#include "ergodic_hjb/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "ergodic_hjb/errors.hpp"

namespace ergodic_hjb {

std::string to_string(BoundaryRule rule) {
  return rule == BoundaryRule::kClamp ? "clamp" : "extend_linear";
}

BoundaryRule boundary_rule_from_string(const std::string& s) {
  if (s == "clamp") return BoundaryRule::kClamp;
  if (s == "extend_linear") return BoundaryRule::kExtendLinear;
  throw InputError("unknown boundary rule '" + s + "' (expected extend_linear or clamp)");
}

Grid::Grid(std::vector<double> lower, std::vector<double> upper, std::vector<int> nodes)
    : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes)) {
  const std::size_t d = nodes_.size();
  if (d == 0) throw InputError("grid needs at least one axis");
  if (lower_.size() != d || upper_.size() != d)
    throw InputError("grid corners and node counts must have the same dimension");
  spacing_.resize(d);
  strides_.resize(d);
  size_ = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (nodes_[k] < 3)
      throw InputError("grid axis " + std::to_string(k) + " has " + std::to_string(nodes_[k]) +
                       " nodes; at least 3 nodes per axis are required");
    if (!(upper_[k] > lower_[k]))
      throw InputError("grid axis " + std::to_string(k) + " needs upper > lower");
    spacing_[k] = (upper_[k] - lower_[k]) / (nodes_[k] - 1);
  }
  for (std::size_t k = d; k-- > 0;) {
    strides_[k] = size_;
    size_ *= static_cast<std::size_t>(nodes_[k]);
  }
}

Grid Grid::cube(int d, double half_width, int n) {
  return Grid(std::vector<double>(static_cast<std::size_t>(d), -half_width),
              std::vector<double>(static_cast<std::size_t>(d), half_width),
              std::vector<int>(static_cast<std::size_t>(d), n));
}

double Grid::min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.end()); }

std::vector<int> Grid::multi_index(std::size_t flat) const {
  std::vector<int> idx(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    idx[k] = static_cast<int>(flat / strides_[k]);
    flat %= strides_[k];
  }
  return idx;
}

std::size_t Grid::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) flat += static_cast<std::size_t>(idx[k]) * strides_[k];
  return flat;
}

Vec Grid::node(std::size_t flat) const {
  Vec x(dimension());
  node_into(flat, x.data());
  return x;
}

void Grid::node_into(std::size_t flat, double* out) const {
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    auto i = flat / strides_[k];
    flat %= strides_[k];
    out[k] = lower_[k] + spacing_[k] * static_cast<double>(i);
  }
}

bool Grid::contains(const Vec& x, double slack) const {
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    if (x(static_cast<Eigen::Index>(k)) < lower_[k] - slack ||
        x(static_cast<Eigen::Index>(k)) > upper_[k] + slack)
      return false;
  return true;
}

bool Grid::is_interior(std::size_t flat) const {
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    auto i = flat / strides_[k];
    flat %= strides_[k];
    if (i == 0 || static_cast<int>(i) == nodes_[k] - 1) return false;
  }
  return true;
}

std::size_t Grid::nearest(const Vec& x) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    double s = (x(static_cast<Eigen::Index>(k)) - lower_[k]) / spacing_[k];
    long i = std::lround(std::clamp(s, 0.0, static_cast<double>(nodes_[k] - 1)));
    flat += static_cast<std::size_t>(i) * strides_[k];
  }
  return flat;
}

bool Grid::operator==(const Grid& other) const {
  return nodes_ == other.nodes_ && lower_ == other.lower_ && upper_ == other.upper_;
}

ValueField::ValueField(Grid grid, double fill)
    : grid_(std::move(grid)), values_(grid_.size(), fill) {}

ValueField::ValueField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw InputError("value count does not match grid size");
}

double ValueField::interpolate(const Vec& x, BoundaryRule rule) const {
  if (x.size() != grid_.dimension()) throw InputError("interpolation point dimension mismatch");
  return interpolate(x.data(), rule);
}

double ValueField::interpolate(const double* x, BoundaryRule rule) const {
  const int d = grid_.dimension();
  const auto& lower = grid_.lower();
  const auto& h = grid_.spacing();
  const auto& n = grid_.nodes();
  const auto& stride = grid_.strides();
  std::size_t base = 0;
  double frac[kMaxDim];
  for (int k = 0; k < d; ++k) {
    double s = (x[k] - lower[static_cast<std::size_t>(k)]) / h[static_cast<std::size_t>(k)];
    // Nodes map back to integers only up to rounding; snap so nodal values are reproduced exactly.
    const double r = std::nearbyint(s);
    if (std::abs(s - r) <= 1e-12 * (1.0 + std::abs(s))) s = r;
    const double top = static_cast<double>(n[static_cast<std::size_t>(k)] - 1);
    if (rule == BoundaryRule::kClamp) s = std::fmin(std::fmax(s, 0.0), top);
    // fmin/fmax map NaN to a valid cell; the NaN still propagates through frac.
    double cell = std::fmin(std::fmax(std::floor(s), 0.0), top - 1.0);
    frac[k] = s - cell;
    base += static_cast<std::size_t>(cell) * stride[static_cast<std::size_t>(k)];
  }
  // Sum over the 2^d corners.
  double acc = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    std::size_t idx = base;
    for (int k = 0; k < d; ++k) {
      if (corner & (1 << k)) {
        w *= frac[k];
        idx += stride[static_cast<std::size_t>(k)];
      } else {
        w *= 1.0 - frac[k];
      }
    }
    acc += w * values_[idx];
  }
  return acc;
}

bool ValueField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ValueField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ValueField::min() const { return *std::min_element(values_.begin(), values_.end()); }

double sup_distance(const ValueField& a, const ValueField& b) {
  if (!(a.grid() == b.grid())) throw InputError("fields live on different grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values_.size(); ++i) s = std::max(s, std::abs(a.values_[i] - b.values_[i]));
  return s;
}

ValueField ValueField::operator+(double c) const {
  ValueField out = *this;
  for (auto& v : out.values_) v += c;
  return out;
}

void write_field_csv(std::ostream& out, const ValueField& field) {
  const Grid& g = field.grid();
  const int d = g.dimension();
  for (int k = 1; k <= d; ++k) out << "x_" << k << ',';
  out << "value\n";
  char buf[64];
  double x[kMaxDim];
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.node_into(i, x);
    for (int k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,", x[k]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", field[i]);
    out << buf;
  }
}

namespace {

constexpr char kMagic[8] = {'E', 'H', 'J', 'B', 'V', 'F', '0', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw InputError("truncated binary field");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_field_binary(std::ostream& out, const ValueField& field) {
  const Grid& g = field.grid();
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.dimension()));
  for (int n : g.nodes()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  for (double v : g.lower()) put_le<double>(out, v);
  for (double v : g.upper()) put_le<double>(out, v);
  for (double v : field.values()) put_le<double>(out, v);
}

ValueField read_field_binary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InputError("bad field magic");
  auto d = get_le<std::uint32_t>(in);
  if (d == 0 || d > static_cast<std::uint32_t>(kMaxDim)) throw InputError("bad field dimension");
  std::vector<int> nodes(d);
  std::vector<double> lower(d), upper(d);
  for (auto& n : nodes) n = static_cast<int>(get_le<std::uint32_t>(in));
  for (auto& v : lower) v = get_le<double>(in);
  for (auto& v : upper) v = get_le<double>(in);
  Grid grid(lower, upper, nodes);
  std::vector<double> values(grid.size());
  for (auto& v : values) v = get_le<double>(in);
  return ValueField(std::move(grid), std::move(values));
}

}  // namespace ergodic_hjb
