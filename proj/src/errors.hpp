#pragma once

#include <stdexcept>
#include <string>

namespace l2t {

// Every failure raised by the core derives from Error; the C API maps each
// subclass onto one status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected input: shape mismatch, out-of-range index, bad precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced during evaluation or training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public NumericalError {
 public:
  TrainingError(const std::string& what, int epoch) : NumericalError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Accuracy gate or invariant violation during an experiment.
class GateFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  enum class Kind { kVersion, kTruncated, kChecksum, kMalformed };
  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace l2t
