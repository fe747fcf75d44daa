#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace issp {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A function was evaluated outside its domain (ln of a non-positive value,
/// division by zero, non-finite result, ...).
class DomainError : public Error
{
public:
  using Error::Error;
};

class SyntaxError : public Error
{
public:
  SyntaxError(std::size_t offset, const std::string& message)
      : Error("syntax error at offset " + std::to_string(offset) + ": " + message),
        offset_(offset)
  {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

class UnboundVariableError : public Error
{
public:
  using Error::Error;
};

/// Constants or parameters leave no admissible value (e.g. a decay rate <= 0).
class InfeasibleError : public Error
{
public:
  using Error::Error;
};

class InversionError : public Error
{
public:
  using Error::Error;
};

class ValidationError : public Error
{
public:
  using Error::Error;
};

class PreconditionError : public Error
{
public:
  using Error::Error;
};

/// Trace-constant search did not converge; carries the best value found.
class EstimationError : public Error
{
public:
  EstimationError(const std::string& message, double best_value)
      : Error(message), best_value_(best_value)
  {}

  double best_value() const noexcept { return best_value_; }

private:
  double best_value_;
};

class LoadError : public Error
{
public:
  using Error::Error;
};

}  // namespace issp
