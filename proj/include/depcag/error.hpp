#pragma once

#include <stdexcept>
#include <string>

namespace depcag {

// Base for every library failure; carries a short machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Malformed or inconsistent configuration. `condition` names the violated
// hypothesis when there is one (A1, frakB2, ...), `path` the JSON location.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, std::string condition, const std::string& what)
      : Error("config", what), path_(std::move(path)), condition_(std::move(condition)) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& condition() const noexcept { return condition_; }

 private:
  std::string path_;
  std::string condition_;
};

// A query outside the configured window or an unsupported argument.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

// Numerical breakdown: singular J, non-convergence, bracket escape.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

// Raised when an operation requires hypotheses that the system fails.
class HypothesisError : public Error {
 public:
  HypothesisError(std::string condition, const std::string& what)
      : Error("hypothesis", what), condition_(std::move(condition)) {}
  const std::string& condition() const noexcept { return condition_; }

 private:
  std::string condition_;
};

}  // namespace depcag
