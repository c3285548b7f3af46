#ifndef KCR_ERROR_HPP
#define KCR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace kcr {

// Root of every error the library throws. The CLI maps the three branches
// below onto its exit codes (usage 1, data 2, numerical/runtime 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition: wrong shape, bad argument, invalid config.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Missing forward cache, missing gradient, etc.
class StateError : public Error {
 public:
  using Error::Error;
};

// Anything that came from disk: unreadable files, malformed images,
// bad directory layouts, damaged checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public DataError {
 public:
  enum class Kind { Io, NotACheckpoint, Version, Checksum, Truncated, Malformed };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace kcr

#endif  // KCR_ERROR_HPP
