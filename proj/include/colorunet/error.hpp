#pragma once

#include <stdexcept>
#include <string>

namespace colorunet {

/// Base class for every error thrown by the toolkit. The category decides the
/// CLI exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration, bad arguments, shape contracts violated by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Unreadable, corrupt or insufficient input data (images, files, logs).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Malformed serialized artifact (magic, version, checksum, truncation).
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite loss or gradient.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace colorunet
