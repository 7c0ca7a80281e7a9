#pragma once

#include <stdexcept>
#include <string>

namespace lgnn {

/// Base of every error raised by the library. Each subclass names one failure
/// class so callers (and the CLI's exit-code mapping) can dispatch on it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// A hyperparameter or argument outside its valid range.
class ParameterError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

/// API misuse, e.g. backward through a value that is not on a tape.
class UsageError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Data that cannot support the requested procedure (single class, too few samples).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

class MetricUndefinedError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace lgnn
