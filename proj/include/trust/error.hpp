#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trust {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class IndexError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "index"; }
};

/// Zero-norm vectors, constant rank sequences and similar inputs with no
/// well-defined answer.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate_input"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

class InfeasibleSpecError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "infeasible_spec"; }
};

class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }
  const char* kind() const noexcept override { return "optimization"; }

 private:
  std::size_t iteration_;
};

/// Wraps a per-sample failure inside a batch with the offending index.
class BatchError : public Error {
 public:
  BatchError(std::size_t sample_index, const std::string& inner_kind, const std::string& what)
      : Error("sample " + std::to_string(sample_index) + ": " + what),
        sample_index_(sample_index),
        inner_kind_(inner_kind) {}
  std::size_t sample_index() const noexcept { return sample_index_; }
  const std::string& inner_kind() const noexcept { return inner_kind_; }
  const char* kind() const noexcept override { return "batch"; }

 private:
  std::size_t sample_index_;
  std::string inner_kind_;
};

}  // namespace trust
