#ifndef EBACKTEST_ERRORS_HPP
#define EBACKTEST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ebacktest {

/// Invalid distribution, statistic, or strategy parameters.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (p outside (0,1), x < a, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed input data: record gaps, missing columns, NaN losses.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file lacks a required column or has a malformed header.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration file or unknown configuration key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ebacktest

#endif // EBACKTEST_ERRORS_HPP
