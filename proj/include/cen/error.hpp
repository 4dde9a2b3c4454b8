#ifndef CEN_ERROR_HPP
#define CEN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cen {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not compose.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A value lies outside the domain an operation accepts.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Malformed, missing or unknown configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// File system or file format failure.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace cen

#endif
