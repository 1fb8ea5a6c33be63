// Error taxonomy shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace secrecy {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Scenario validation failures (each message names the offending field).
class ValidationError : public Error {
public:
    using Error::Error;
};
class NoDestination : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class DuplicatePosition : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class NonPositiveParameter : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Two nodes (or a node and the UAV) closer than the geometric tolerance.
class CoincidentNodes : public Error {
public:
    using Error::Error;
};

/// Argument outside a function's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A truncated series hit its term cap before reaching tolerance.
class NonConvergence : public Error {
public:
    using Error::Error;
};

/// A factorization pivot fell below the singularity tolerance where a
/// nonsingular matrix is required.
class SingularToTolerance : public Error {
public:
    using Error::Error;
};

/// Eigenvalue confluence survived the separation guard.
class ConfluentEigenvalues : public Error {
public:
    using Error::Error;
};

/// Power-coefficient confluence survived the separation guard.
class ConfluentPowers : public Error {
public:
    using Error::Error;
};

/// Configuration file could not be parsed; message carries the field path.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Exhaustive-search grid exceeds the configured cell cap.
class GridTooLarge : public Error {
public:
    using Error::Error;
};

/// An optimization anchor point violates the constraint it must satisfy.
class InfeasibleAnchor : public Error {
public:
    using Error::Error;
};

}  // namespace secrecy
