#pragma once

#include <stdexcept>
#include <string>

namespace ragred {

// Base error for everything raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or invalid argument values. CLI exit code 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

// A pipeline stage was invoked before its prerequisite artifact exists.
// CLI exit code 3.
class MissingArtifactError : public Error {
public:
  using Error::Error;
};

// Generation/embedding provider failure (transport, exhausted retries,
// contract violations in provider output). CLI exit code 4.
class ProviderError : public Error {
public:
  using Error::Error;
};

// File system / serialization failures.
class IoError : public Error {
public:
  using Error::Error;
};

// Malformed input data; message carries the offending location.
class ParseError : public Error {
public:
  using Error::Error;
};

// Caller violated an operation precondition.
class PreconditionError : public Error {
public:
  using Error::Error;
};

}  // namespace ragred
