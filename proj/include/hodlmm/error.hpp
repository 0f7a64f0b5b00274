#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hodlmm {

/// Coarse failure classes; the command-line tool maps each to an exit code.
enum class ErrorClass { parse, dimension, numerical, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(ErrorClass::dimension, what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error(ErrorClass::dimension, what) {}
};

class ToleranceUnreachable : public Error {
 public:
  ToleranceUnreachable(const std::string& what, double residual)
      : Error(ErrorClass::numerical, what), residual_(residual) {}
  /// Frobenius residual achieved at the rank cap.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class NumericalSingularity : public Error {
 public:
  NumericalSingularity(const std::string& what, std::size_t offset, std::size_t size)
      : Error(ErrorClass::numerical, what), offset_(offset), size_(size) {}
  /// Global row/column offset of the failing diagonal block.
  std::size_t block_offset() const noexcept { return offset_; }
  std::size_t block_size() const noexcept { return size_; }

 private:
  std::size_t offset_;
  std::size_t size_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

// Statistical degeneracies. All are numerical failures from the CLI's point of view.
class EmptyDesign : public NumericalError {
  using NumericalError::NumericalError;
};
class DegeneratePhenotype : public NumericalError {
  using NumericalError::NumericalError;
};
class UnidentifiableHeritability : public NumericalError {
  using NumericalError::NumericalError;
};
class SingularDesign : public NumericalError {
  using NumericalError::NumericalError;
};
class InsufficientDof : public NumericalError {
  using NumericalError::NumericalError;
};
class InvalidVariance : public NumericalError {
  using NumericalError::NumericalError;
};
class UndefinedAuc : public NumericalError {
  using NumericalError::NumericalError;
};
class FactorizationFailure : public NumericalError {
  using NumericalError::NumericalError;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(ErrorClass::parse, what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorClass::io, what) {}
};

}  // namespace hodlmm
