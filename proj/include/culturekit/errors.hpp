#pragma once

#include <stdexcept>
#include <string>

namespace culturekit {

// Failure categories; the CLI maps them onto exit codes
// (config/validation/usage/dependency/capability -> 1, transport -> 2).
class Error : public std::runtime_error {
 public:
  enum class Kind {
    config,
    validation,
    usage,
    capability,
    transport,
    data,
    dependency,
    undefined_correlation,
  };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(Kind::config, m) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(Kind::validation, m) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& m) : Error(Kind::usage, m) {}
};
struct CapabilityError : Error {
  explicit CapabilityError(const std::string& m) : Error(Kind::capability, m) {}
};
struct TransportError : Error {
  explicit TransportError(const std::string& m) : Error(Kind::transport, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(Kind::data, m) {}
};
struct DependencyError : Error {
  explicit DependencyError(const std::string& m) : Error(Kind::dependency, m) {}
};
struct UndefinedCorrelationError : Error {
  explicit UndefinedCorrelationError(const std::string& m)
      : Error(Kind::undefined_correlation, m) {}
};

}  // namespace culturekit
