#pragma once

#include <stdexcept>
#include <string>

namespace lopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A scalar function returned a non-finite value during finite differencing.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, long coordinate)
      : Error(what), coordinate_(coordinate) {}
  long coordinate() const { return coordinate_; }

 private:
  long coordinate_;
};

/// Operation requested on a problem of the wrong task kind.
class KindError : public Error {
 public:
  using Error::Error;
};

class InstanceError : public Error {
 public:
  using Error::Error;
};

class TuningError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

/// Raised by a meta step when every problem in the batch diverged.
class StepError : public Error {
 public:
  StepError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace lopt
