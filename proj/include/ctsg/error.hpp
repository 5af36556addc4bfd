#pragma once

#include <stdexcept>
#include <string>

namespace ctsg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor or series shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Division by zero, non-finite results, zero variance and similar.
class NumericError : public Error {
public:
    using Error::Error;
};

/// API misuse: bad arguments, out-of-range steps, unnormalized data.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values (schedules, role mappings, solver settings).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Constraint index out of range or malformed constraint definitions.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// Malformed text input (CSV cells, expressions, config files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Missing columns or structurally invalid tables.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Corrupt, truncated or incompatible checkpoint files.
class CheckpointError : public Error {
public:
    using Error::Error;
};

/// File system failures.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ctsg
