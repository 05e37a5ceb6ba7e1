#pragma once

#include <stdexcept>
#include <string>

namespace rex {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration (missing keys, absent files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Parse failure with file/line context.
class ParseError : public DataError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what),
        path_(path),
        line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

// Unknown entity/relation/class id or label.
class LookupError : public DataError {
 public:
  using DataError::DataError;
};

// Information content requested for a node with zero (relation-)degree.
class UndefinedICError : public DataError {
 public:
  using DataError::DataError;
};

// A caller violated an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Optimization failure (non-finite gradients and friends).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Filesystem write/read failure.
class IOError : public Error {
 public:
  using Error::Error;
};

}  // namespace rex
