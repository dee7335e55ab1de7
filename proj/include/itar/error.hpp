#pragma once

#include <stdexcept>
#include <string>

namespace itar {

// Malformed or inconsistent input data (corpus files, bank files, dimension
// mismatches between a model and a corpus).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A corpus/bank file that failed to parse. Carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid experiment configuration (flags, config file, regularizer setup).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace itar
