#pragma once

#include <stdexcept>
#include <string>

namespace eoc {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input outside the documented domain of an operation (bad gamma, negative
// variance, |c| > 1, ...). The CLI maps these to usage errors.
class DomainError : public Error {
public:
  using Error::Error;
};

class UnsupportedDerivative : public DomainError {
public:
  using DomainError::DomainError;
};

// Everything below is a numerical failure on valid input.
class NumericalError : public Error {
public:
  using Error::Error;
};

class NonFiniteIntegrand : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NonPositiveLogArgument : public NumericalError {
public:
  NonPositiveLogArgument(const std::string& what, double argument)
      : NumericalError(what), argument_(argument) {}
  double argument() const noexcept { return argument_; }

private:
  double argument_;
};

class NoConvergence : public NumericalError {
public:
  NoConvergence(const std::string& what, int iterations, double last_value, double residual)
      : NumericalError(what), iterations_(iterations), last_value_(last_value), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double last_value() const noexcept { return last_value_; }
  double residual() const noexcept { return residual_; }

private:
  int iterations_;
  double last_value_;
  double residual_;
};

class ReversionFailure : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DegenerateSpectrum : public NumericalError {
public:
  using NumericalError::NumericalError;
};

// Overflow while propagating through the network; carries the 1-based layer.
class NumericalOverflow : public NumericalError {
public:
  NumericalOverflow(const std::string& what, int layer) : NumericalError(what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

private:
  int layer_;
};

class SvdFailure : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace eoc
