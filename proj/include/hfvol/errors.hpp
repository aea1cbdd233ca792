#pragma once

#include <stdexcept>
#include <string>

namespace hfvol {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or tuning; the CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

/// Index windows that run past the end of the sample.
class RangeError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// A matrix fell outside a functional's admissible domain.
class GuardError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

[[noreturn]] void throw_config(const std::string& what);

}  // namespace hfvol
