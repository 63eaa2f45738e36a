#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reduxion {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DuplicateLabel : public Error {
public:
    using Error::Error;
};

class IncompatibleLabel : public Error {
public:
    using Error::Error;
};

class StepTooLarge : public Error {
public:
    using Error::Error;
};

class NotReady : public Error {
public:
    using Error::Error;
};

class NotResidual : public Error {
public:
    using Error::Error;
};

class UnknownScenario : public Error {
public:
    using Error::Error;
};

class InvalidOverride : public Error {
public:
    using Error::Error;
};

class Unclassifiable : public Error {
public:
    using Error::Error;
};

/// Malformed scenario text. Line and column are 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column), detail_(what) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string detail_;
};

/// Well-formed text describing an invalid scenario.
class SemanticError : public Error {
public:
    using Error::Error;
};

}  // namespace reduxion
