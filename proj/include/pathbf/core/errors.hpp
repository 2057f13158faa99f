#pragma once

#include <stdexcept>
#include <string>

namespace pathbf {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class GridError : public Error {
public:
    using Error::Error;
};

class DegenerateSeries : public Error {
public:
    using Error::Error;
};

class OverparameterizedModel : public Error {
public:
    using Error::Error;
};

/// A conditional covariance lost positive definiteness inside a sweep.
class NumericalBreakdown : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long row = -1, long column = -1)
        : Error(what), row_(row), column_(column) {}
    long row() const { return row_; }
    long column() const { return column_; }

private:
    long row_;
    long column_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SingularInformation : public Error {
public:
    using Error::Error;
};

} // namespace pathbf
