#pragma once

// Exception types thrown by the library.  The CLI maps each category to a
// distinct process exit code, so the hierarchy matters more than the text.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace khmgof {

// Malformed textual input: family specs, CSV/TSV files, config strings.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Mathematically invalid argument: out-of-range probability, non-finite
// input, sample too small, and similar.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// A point sits so deep in the upper tail that time-scale integrals past it
// cannot be represented (F(x) >= 1 - 1e-12).
class TailOverflowError : public DomainError {
 public:
  TailOverflowError(const std::string& msg, double x)
      : DomainError(msg), x_(x) {}
  double point() const { return x_; }

 private:
  double x_;
};

// Boxcar regression window around x contains no design points.
class EmptyWindowError : public DomainError {
 public:
  EmptyWindowError(const std::string& msg, double x, double bandwidth)
      : DomainError(msg), x_(x), bandwidth_(bandwidth) {}
  double point() const { return x_; }
  double bandwidth() const { return bandwidth_; }

 private:
  double x_;
  double bandwidth_;
};

// Sample carries no usable spread (e.g. all residuals equal).
class DegenerateSampleError : public DomainError {
 public:
  explicit DegenerateSampleError(const std::string& msg) : DomainError(msg) {}
};

// A matrix solve hit condition number past the supported cap without being
// structurally rank-deficient.
class IllConditionedError : public DomainError {
 public:
  explicit IllConditionedError(const std::string& msg) : DomainError(msg) {}
};

// Monte Carlo experiment could not complete (too many aborted replicates).
class ExperimentError : public std::runtime_error {
 public:
  explicit ExperimentError(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace khmgof
