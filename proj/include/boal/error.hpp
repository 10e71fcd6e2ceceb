#pragma once

#include <stdexcept>
#include <string>

namespace boal {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument or state failed a precondition (bad range, NaN loss, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An expert could not produce a prediction.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or incomplete configuration (missing prior, empty strategy list, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. The message names the offending row (1-based line
/// number, header included).
class ParseError : public Error {
public:
    enum class Kind { io, header, columns, number, contiguity, duplicate_id, label };

    ParseError(Kind kind, const std::string& what, long row)
        : Error(what + " (row " + std::to_string(row) + ")"), kind_(kind), row_(row) {}

    Kind kind() const noexcept { return kind_; }
    long row() const noexcept { return row_; }

private:
    Kind kind_;
    long row_;
};

/// Statistical test input with no information (all paired differences zero).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Failure while executing a run (e.g. the label source could not answer).
class RunError : public Error {
public:
    using Error::Error;
};

/// Request is valid in isolation but conflicts with the current session state.
class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

} // namespace boal
