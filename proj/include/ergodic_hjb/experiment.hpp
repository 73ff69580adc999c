#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ergodic_hjb/config.hpp"

namespace ergodic_hjb {

/// Process exit codes of `run_experiment`.
enum ExitCode : int {
  kExitOk = 0,
  kExitAssertionFailed = 1,
  kExitSchemaError = 2,
  kExitDivergence = 3,
};

/// Ordered key=value records; numbers are written with 17 significant digits.
class Summary {
 public:
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, bool value);
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  /// Numeric value of `key`, if it was stored as a number or boolean.
  std::optional<double> number(const std::string& key) const;
  const std::string* text(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& out) const;

 private:
  void put(const std::string& key, std::string text, std::optional<double> value);

  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<std::optional<double>> values_;
};

struct RunOutcome {
  int exit_code = kExitOk;
  Summary summary;
  std::vector<std::string> files;  // written artifacts, relative to output_dir
  std::string message;             // diagnostic for nonzero exits
};

/// Validates the config, runs its task and writes the artifacts into
/// `output_dir`: task CSVs, binary fields, summary.txt and config.json.
/// With `dry_run`, prints the plan to `log` and writes nothing. Never throws
/// for config or solver failures; those map to exit codes 2 and 3.
RunOutcome run_experiment(const ExperimentConfig& config, bool dry_run, std::ostream& log);

/// Parses JSON text and runs it; schema problems become exit code 2.
RunOutcome run_experiment_text(const std::string& json_text, bool dry_run, std::ostream& log);

}  // namespace ergodic_hjb
