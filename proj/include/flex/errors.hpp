#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flex {

/// Malformed case document or message payload.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A network or configuration violates one or more invariants.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed";
    for (const auto& s : v) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

/// Invalid solver or mechanism configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A clearing problem could not be solved to optimality.
class SolveError : public std::runtime_error {
public:
  SolveError(std::string area, int round, std::string status, const std::string& what)
      : std::runtime_error(what), area_(std::move(area)), round_(round), status_(std::move(status)) {}

  const std::string& area() const noexcept { return area_; }
  /// Mechanism round in which the failure occurred, or -1 outside the mechanism.
  int round() const noexcept { return round_; }
  const std::string& status() const noexcept { return status_; }
  bool infeasible() const noexcept { return status_ == "infeasible"; }

private:
  std::string area_;
  int round_;
  std::string status_;
};

/// Exchange message arrived for a different round than the receiver expects.
class StaleMessageError : public std::runtime_error {
public:
  StaleMessageError(int expected, int got)
      : std::runtime_error("stale message: expected round " + std::to_string(expected) + ", got " +
                           std::to_string(got)),
        expected_(expected), got_(got) {}

  int expected() const noexcept { return expected_; }
  int got() const noexcept { return got_; }

private:
  int expected_;
  int got_;
};

}  // namespace flex
