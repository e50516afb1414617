#pragma once

#include <stdexcept>
#include <string>

namespace dmorse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateConfiguration : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// Raised when a configuration or argument is invalid. `field()` carries the
/// dotted path of the offending field when one applies.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Size, cap and budget violations. The CLI maps every subclass to exit code 3.
class CapError : public Error {
public:
    using Error::Error;
};

class OracleCapExceeded : public CapError {
public:
    using CapError::CapError;
};

class GlobalCapExceeded : public CapError {
public:
    using CapError::CapError;
};

class ComplexTooLarge : public CapError {
public:
    using CapError::CapError;
};

class BudgetExceeded : public CapError {
public:
    using CapError::CapError;
};

class TruncatedComplex : public Error {
public:
    using Error::Error;
};

class WrongRegime : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace dmorse
