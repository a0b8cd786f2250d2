#ifndef MODCAUSAL_ERROR_HPP
#define MODCAUSAL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modcausal {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. `line()` is 1-based; 0 when not applicable.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Input parses but violates a tree/corpus invariant (duplicates, cycles, ...).
class StructuralError : public Error {
public:
  using Error::Error;
};

class LookupError : public Error {
public:
  using Error::Error;
};

/// Missing or invalid configuration (lexicons, generator parameters).
class ConfigError : public Error {
public:
  using Error::Error;
};

class SampleSizeError : public Error {
public:
  using Error::Error;
};

class SingularityError : public Error {
public:
  using Error::Error;
};

/// Sample has zero variance, so a t statistic is undefined.
class DegenerateSampleError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class UnsupportedFeatureError : public Error {
public:
  using Error::Error;
};

} // namespace modcausal

#endif // MODCAUSAL_ERROR_HPP
