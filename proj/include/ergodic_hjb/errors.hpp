#pragma once

#include <stdexcept>
#include <string>

namespace ergodic_hjb {

/// Malformed input: dimension mismatches, bad config fields, invalid grids.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Config document does not match the schema; `path()` points at the field
/// (JSON-pointer style, e.g. "/grid/nodes/0").
class SchemaError : public InputError {
 public:
  SchemaError(std::string path, const std::string& what)
      : InputError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// A requested evaluation mode is not available for the given spec kind.
class ModeError : public std::invalid_argument {
 public:
  explicit ModeError(const std::string& what) : std::invalid_argument(what) {}
};

/// A non-finite value appeared during integration, optimization or a grid sweep.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// A fixed-point iteration hit its iteration cap before reaching tolerance.
class IterationLimitError : public std::runtime_error {
 public:
  IterationLimitError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// An optimizer finished without meeting its constraint tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A property the theory guarantees was violated beyond the scheme tolerance;
/// usually means the discretization is too coarse.
class ConsistencyError : public std::runtime_error {
 public:
  explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ergodic_hjb
