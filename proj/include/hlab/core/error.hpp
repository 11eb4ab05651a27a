#pragma once

#include <stdexcept>
#include <string>

namespace hlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Work budget exceeded (e.g. tensor quadrature with too many nodes).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// An iterative or adaptive numerical method failed to converge.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double partial = 0.0)
      : Error(what), partial_(partial) {}
  double partial_result() const noexcept { return partial_; }

 private:
  double partial_;
};

/// Evaluation at the singularity of a kernel.
class PoleError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Index outside the valid range of a container-like object.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DomainError(msg);
}

}  // namespace detail
}  // namespace hlab
