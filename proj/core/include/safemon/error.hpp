#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace safemon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Formula text did not match the grammar.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

  [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A state component index outside [0, state_dim).
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Temporal interval with upper bound below lower bound.
class IntervalError : public Error {
 public:
  using Error::Error;
};

/// Trace too short to evaluate every temporal window of a formula.
class HorizonError : public Error {
 public:
  using Error::Error;
};

/// Predicate evaluation failed (e.g. near-zero divisor).
class EvalError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Calibration set too small for the requested robust quantile.
class CalibrationSizeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries the epoch at which the loss became NaN.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  [[nodiscard]] int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Configuration validation failure; `field()` is a JSON-pointer-like path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace safemon
