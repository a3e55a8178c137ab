#pragma once

#include <stdexcept>
#include <string>

namespace magdirac {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (x <= 0 for U, E1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Gamma evaluated at a nonpositive integer.
class PoleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Unsupported or inconsistent parameter combination.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Grid not strictly increasing, or grid/gauge size mismatch.
class GridError : public Error {
public:
    using Error::Error;
};

/// Spectral parameter too close to a Landau level.
class OnSpectrumError : public Error {
public:
    using Error::Error;
};

/// Green kernel requested at x == x'.
class CoincidentPointError : public Error {
public:
    using Error::Error;
};

/// Eigensolver failed to deliver the requested pairs.
class SolverError : public Error {
public:
    using Error::Error;
};

class IllConditionedError : public Error {
public:
    using Error::Error;
};

/// Eigenfunction amplitude hit the floor before enough tail nodes were seen.
class TailUnderflowError : public Error {
public:
    using Error::Error;
};

/// Selected eigenvalue is not a gap state.
class NotGapStateError : public Error {
public:
    using Error::Error;
};

class TooFewChannelsError : public Error {
public:
    using Error::Error;
};

}  // namespace magdirac
