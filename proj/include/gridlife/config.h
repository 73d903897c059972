#ifndef GRIDLIFE_CONFIG_H
#define GRIDLIFE_CONFIG_H

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace gridlife::config {

// Files handed to one command. Absent entries are skipped.
struct Bundle {
  std::optional<std::filesystem::path> lifecycle;
  std::optional<std::filesystem::path> battery;
  std::optional<std::filesystem::path> pso;
  std::optional<std::filesystem::path> scenario;
  std::optional<std::filesystem::path> model_cyclic;
  std::optional<std::filesystem::path> model_calendar;
  double tau_h = 1.0;
  // Quantile the run will query; defaults to the lifecycle config's.
  std::optional<double> quantile;
};

struct Validation {
  nlohmann::json normalized = nlohmann::json::object();
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
  /// All errors, one per line.
  std::string report() const;
};

/// Checks every file and the cross-file invariants (sell <= buy per step,
/// end-of-life capacity below rated capacity, queried quantile present in
/// both models) without stopping at the first problem.
Validation validate_config(const Bundle& bundle);

/// Throws ConfigError carrying the whole report when validation fails.
nlohmann::json require_valid(const Bundle& bundle);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace gridlife::config

#endif  // GRIDLIFE_CONFIG_H
