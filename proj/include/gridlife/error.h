#ifndef GRIDLIFE_ERROR_H
#define GRIDLIFE_ERROR_H

#include <stdexcept>
#include <string>

namespace gridlife {

// Exit codes reported by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kInfeasible = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid configuration value or inconsistent configuration bundle.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

/// Malformed or out-of-domain input data (bad CSV, NaN labels, non-positive energies).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

/// An optimization problem had no feasible point.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(ExitCode::kInfeasible, what) {}
};

}  // namespace gridlife

#endif  // GRIDLIFE_ERROR_H
