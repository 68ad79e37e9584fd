#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace cgate {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bytes in a TZR stream. offset() is the first byte that failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};
class SizeError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};
class CalibrationError : public Error {
 public:
  using Error::Error;
};
class FitError : public Error {
 public:
  using Error::Error;
};
class DomainError : public Error {
 public:
  using Error::Error;
};
// Missing, unreadable or inconsistent input data (files, manifests).
class DataError : public Error {
 public:
  using Error::Error;
};
class IoError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace cgate
