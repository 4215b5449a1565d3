#pragma once

#include <stdexcept>
#include <string>

namespace halogen {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input text or file content. Carries a human-readable location
/// (file/line) in the message when one is known.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A domain invariant or operation precondition was violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A computation is mathematically undefined for the given input.
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace halogen
