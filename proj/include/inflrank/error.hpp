#pragma once

#include <stdexcept>
#include <string>

namespace inflrank {

// Every library failure derives from Error. The category decides the CLI
// exit code: config 2, data 3, numeric 4.
enum class ErrorCategory { config, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Tensor or embedding dimensions disagree.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// API misuse: empty inputs, invalid flags, stale caches.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

// Malformed or inconsistent dataset files, unknown references.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

// Not enough negatives to fill a pool.
class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class StratificationError : public Error {
 public:
  explicit StratificationError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// A metric was requested on a label set where it is undefined.
class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

}  // namespace inflrank
