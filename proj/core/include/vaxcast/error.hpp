#pragma once

#include <stdexcept>
#include <string>

namespace vaxcast {

// Base for every error raised by the library. `module()` names the component
// that failed so the CLI can report "<module>: <message>" on one line.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class SchemaMismatchError : public Error {
 public:
  explicit SchemaMismatchError(const std::string& message) : Error("data", message) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("data", message) {}
};

class SeparationError : public Error {
 public:
  explicit SeparationError(const std::string& message) : Error("probit", message) {}
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& message, std::string worst_feature)
      : Error("synth", message), worst_feature_(std::move(worst_feature)) {}

  const std::string& worst_feature() const noexcept { return worst_feature_; }

 private:
  std::string worst_feature_;
};

class FingerprintMismatchError : public Error {
 public:
  explicit FingerprintMismatchError(const std::string& message) : Error("forest", message) {}
};

}  // namespace vaxcast
