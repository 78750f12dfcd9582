#pragma once

#include <stdexcept>
#include <string>

namespace ivpseudo {

// Every failure raised by the library derives from Error so callers (the CLI,
// the Monte Carlo runner) can catch one type and still report the category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept { return "error"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "configuration"; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(what), row_(row), column_(column) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }
    const char* category() const noexcept override { return "parse"; }

private:
    std::size_t row_;
    std::size_t column_;
};

class DataError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "data"; }
};

class DimensionError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "dimension"; }
};

class DegeneracyError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "degeneracy"; }
};

class LinearAlgebraError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "linear-algebra"; }
};

class PreconditionError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "precondition"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "io"; }
};

}  // namespace ivpseudo
