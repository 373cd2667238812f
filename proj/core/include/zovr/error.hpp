#ifndef ZOVR_ERROR_HPP
#define ZOVR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace zovr {

// Bad user input: malformed config files, out-of-range parameters,
// inconsistent dimensions. Maps to exit status 4 in the CLI.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A requested parameter setting violates an analysis precondition
// (e.g. the variance-bound denominator is nonpositive). Maps to exit
// status 3 in the CLI. The message names the violated condition.
class InfeasibleSettingsError : public std::runtime_error {
 public:
  explicit InfeasibleSettingsError(const std::string& what)
      : std::runtime_error(what) {}
};

// Log replay found an entry inconsistent with the recorded dynamics.
class VerificationError : public std::runtime_error {
 public:
  explicit VerificationError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace zovr

#endif  // ZOVR_ERROR_HPP
