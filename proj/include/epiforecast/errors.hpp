#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epi {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed input text. Carries the 1-based line of the offending record.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that violates a data contract (duplicates, gaps, too short).
class DataError : public Error {
public:
    using Error::Error;
};

/// Training diverged or received non-finite values.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// A numeric precondition failed (e.g. zero denominator).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Curve fitting failed.
class FitError : public Error {
public:
    using Error::Error;
};

/// Metric inputs are invalid.
class MetricError : public Error {
public:
    using Error::Error;
};

/// Forecasts and dataset disagree on the set of regions.
class ReportError : public Error {
public:
    using Error::Error;
};

/// Bad command-line flags or configuration values.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Serialized model text is malformed or has the wrong version tag.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace epi
