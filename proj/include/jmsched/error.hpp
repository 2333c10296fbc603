#pragma once

#include <stdexcept>
#include <string>

namespace jms {

/// Error categories surfaced through the C API as status codes.
enum class ErrorCode : int {
    ok = 0,
    domain = 1,        // argument outside the mathematical domain
    config = 2,        // invalid configuration / model specification
    numeric = 3,       // non-finite value or overflow during evaluation
    parse = 4,         // malformed input file
    data = 5,          // dataset violates subject invariants
    precondition = 6,  // operation called in a state it does not support
    io = 7,
    internal = 99,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorCode::domain, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorCode::config, w) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ErrorCode::parse, w) {}
};
struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct PreconditionError : Error {
    explicit PreconditionError(const std::string& w) : Error(ErrorCode::precondition, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCode::io, w) {}
};

/// Non-finite or overflowing value; `location` is the abscissa where it happened.
class NumericError : public Error {
public:
    NumericError(const std::string& w, double location)
        : Error(ErrorCode::numeric, w + " (at " + std::to_string(location) + ")"), location_(location) {}
    double location() const noexcept { return location_; }

private:
    double location_;
};

}  // namespace jms
