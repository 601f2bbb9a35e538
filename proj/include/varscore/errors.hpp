#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace varscore {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message, std::size_t line = 0)
      : Error(line > 0 ? message + " (line " + std::to_string(line) + ")" : message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Structure file produced no usable atoms.
class EmptyStructureError : public Error {
 public:
  explicit EmptyStructureError(const std::string& message) : Error(message) {}
};

// Invariant violated on otherwise well-formed input (non-finite coordinate, bad shape...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error(message) {}
};

// Sequence position has no mapped C-alpha node.
class UnknownPositionError : public Error {
 public:
  explicit UnknownPositionError(const std::string& message) : Error(message) {}
};

// Parameter/feature shapes disagree with the configured dimensions.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(message) {}
};

// Assay wildtype letters disagree with the structure at one or more positions.
class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& message, std::vector<int> positions)
      : Error(message), positions_(std::move(positions)) {}
  const std::vector<int>& positions() const { return positions_; }

 private:
  std::vector<int> positions_;
};

// Correlation is undefined (constant input, empty subset, fewer than two items).
class UndefinedCorrelationError : public Error {
 public:
  explicit UndefinedCorrelationError(const std::string& message) : Error(message) {}
};

// Normal equations are singular at lambda = 0.
class SingularSystemError : public Error {
 public:
  explicit SingularSystemError(const std::string& message) : Error(message) {}
};

// PCA input has too few usable dimensions.
class DimensionalityError : public Error {
 public:
  explicit DimensionalityError(const std::string& message) : Error(message) {}
};

// Remote fetch failed after retries.
class NetworkError : public Error {
 public:
  explicit NetworkError(const std::string& message) : Error(message) {}
};

// Remote resource does not exist.
class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error(message) {}
};

// Downloaded file does not parse.
class CorruptDownloadError : public Error {
 public:
  explicit CorruptDownloadError(const std::string& message) : Error(message) {}
};

// Structure covers too few assay positions and no fallback is available.
class CoverageError : public Error {
 public:
  explicit CoverageError(const std::string& message) : Error(message) {}
};

}  // namespace varscore
