#pragma once

#include <stdexcept>
#include <string>

namespace xwind {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter set violates one of its documented invariants.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Input delay is not an integer number of samples.
class NonIntegerDelay : public InvalidParameter {
public:
    using InvalidParameter::InvalidParameter;
};

/// Observer design requested on an unobservable (A, C) pair.
class Unobservable : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its iteration cap without meeting tolerance.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// Matrix expected to be positive definite was not.
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

/// Simulator state stopped being finite.
class PlantDivergence : public Error {
public:
    using Error::Error;
};

/// Length of a delay buffer disagrees with the model's sample delay.
class BufferMismatch : public Error {
public:
    using Error::Error;
};

/// Scenario document could not be parsed or failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace xwind
