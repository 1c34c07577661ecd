#pragma once

#include <stdexcept>
#include <string>

namespace ztn {

/// Process exit codes reported by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kInvalidConfig = 2,
  kDataError = 3,
  kDivergence = 4,
};

/// Base of every error raised by the library. Each subclass carries the exit
/// code the CLI maps it to.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Bad parameters, unknown action indices, malformed config files.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kInvalidConfig) {}
};

/// Rejected inputs, shape mismatches, short series, schema mismatches, I/O.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::kDataError) {}
};

/// Non-finite loss or Q-value during training.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what, ExitCode::kDivergence) {}
};

}  // namespace ztn
