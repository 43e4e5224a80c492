#pragma once

#include <stdexcept>
#include <string>

namespace cvxclust {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input and argument problems. The CLI maps these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

class PreconditionError : public InputError {
public:
    using InputError::InputError;
};

class IndexError : public InputError {
public:
    using InputError::InputError;
};

class ShapeError : public InputError {
public:
    using InputError::InputError;
};

class LengthError : public InputError {
public:
    using InputError::InputError;
};

class RangeError : public InputError {
public:
    using InputError::InputError;
};

class UnsupportedNorm : public InputError {
public:
    using InputError::InputError;
};

/// Two observations coincide, so the kernel weight and the auto scale are undefined.
class DegenerateError : public InputError {
public:
    using InputError::InputError;
};

/// The fusion graph does not connect all nodes.
class ConnectivityError : public InputError {
public:
    using InputError::InputError;
};

/// An event list does not describe a complete agglomeration down to one cluster.
class IncompleteEventsError : public InputError {
public:
    using InputError::InputError;
};

// Numerical failures. The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IterationCapError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace cvxclust
