#pragma once

#include <stdexcept>
#include <string>

namespace hetrel {

// Each category maps onto one CLI exit code (see cli.hpp).
enum class ErrorKind { Config, Data, Numeric, Verification };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad flags, bad config keys, invalid parameter combinations.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

// Malformed or inconsistent input data: files, ids, types, labels.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Non-finite values, divergent training.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// Programming errors such as mismatched tensor shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace hetrel
