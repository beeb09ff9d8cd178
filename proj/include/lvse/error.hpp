#pragma once

#include <stdexcept>
#include <string>

namespace lvse {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or schema-violating input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Grid graph is not a connected radial tree with a single slack bus.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Measurement set does not make the branch-current state observable.
class ObservabilityError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace lvse
