#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ocrisk {

// Precondition or configuration violation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file. line() is 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Raised when training produces a non-finite risk or gradient.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch, std::string term)
      : std::runtime_error("epoch " + std::to_string(epoch) + " (" + term + "): " + what),
        epoch_(epoch),
        term_(std::move(term)) {}

  int epoch() const { return epoch_; }
  const std::string& term() const { return term_; }

 private:
  int epoch_;
  std::string term_;
};

}  // namespace ocrisk
