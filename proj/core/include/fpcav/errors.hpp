#pragma once

#include <stdexcept>
#include <string>

namespace fpcav {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a type invariant (non-positive length, bad partition, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bias at or beyond the pull-in voltage: no stable static deflection exists.
class PullInExceeded : public Error {
 public:
  using Error::Error;
};

/// Cavity length not strictly inside (0, R).
class UnstableCavity : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// Fewer resolvable dips in a trace than the fit asked for.
class DegenerateTrace : public Error {
 public:
  using Error::Error;
};

class MissingHigherOrder : public Error {
 public:
  using Error::Error;
};

class UnstableLoop : public Error {
 public:
  using Error::Error;
};

class LockLost : public Error {
 public:
  using Error::Error;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class PullInLimited : public Error {
 public:
  using Error::Error;
};

/// Operation requested on a site flagged non-functional.
class DeadSite : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, unknown override key or unreadable input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fpcav
