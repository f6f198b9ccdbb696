#pragma once

#include <stdexcept>
#include <string>

namespace capspoe {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement between operands.
struct ShapeError : Error {
    using Error::Error;
};

// NaN/Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// Configuration file problems: syntax, unknown keys, bad values.
struct ConfigError : Error {
    using Error::Error;
};

// File-format errors. Each failure mode is its own type so callers can
// distinguish them without parsing messages.
struct IoError : Error {
    using Error::Error;
};
struct BadMagicError : IoError {
    using IoError::IoError;
};
struct TruncatedError : IoError {
    using IoError::IoError;
};
struct DimensionError : IoError {
    using IoError::IoError;
};
struct RecordSizeError : IoError {
    using IoError::IoError;
};
struct ChecksumError : IoError {
    using IoError::IoError;
};
struct VersionError : IoError {
    using IoError::IoError;
};

} // namespace capspoe
