#pragma once

#include <stdexcept>
#include <string>

namespace larm {

// All toolkit errors derive from Error so callers can catch one base type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed text: RM sections, transition/reward lines, predicate entries.
// line is 1-based; 0 means "no line available".
class SyntaxError : public Error {
 public:
  SyntaxError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationFailed : public Error {
 public:
  using Error::Error;
};

class UnknownAtom : public SyntaxError {
 public:
  using SyntaxError::SyntaxError;
};

class BadArg : public SyntaxError {
 public:
  using SyntaxError::SyntaxError;
};

class UnknownEvent : public Error {
 public:
  using Error::Error;
};

class UnknownState : public Error {
 public:
  using Error::Error;
};

class MissingInstruction : public Error {
 public:
  using Error::Error;
};

class PositiveCycle : public Error {
 public:
  using Error::Error;
};

class NoFinalReachable : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class UnsatisfiableLayout : public Error {
 public:
  using Error::Error;
};

class EpisodeFinished : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

}  // namespace larm
