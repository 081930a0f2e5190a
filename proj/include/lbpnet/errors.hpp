#pragma once

#include <stdexcept>
#include <string>

namespace lbpnet {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or indices that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied configuration (bad values, unknown keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures: missing files, unreadable or unwritable paths.
class IoError : public Error {
public:
    using Error::Error;
};

// File-format errors. Each is distinct so callers can report the category.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
public:
    using FormatError::FormatError;
};

class CountMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

class CorruptFileError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace lbpnet
