#pragma once

#include <stdexcept>
#include <string>

namespace tomo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad header, truncated payload, wrong magic).
class FormatError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

/// Start or goal does not land on a traversable cell of any slice.
class UnsnappableError : public PlanningError {
 public:
  UnsnappableError(const std::string& which, const std::string& why)
      : PlanningError("unsnappable " + which + ": " + why), which_(which) {}
  const std::string& which() const { return which_; }

 private:
  std::string which_;
};

class NoPathError : public PlanningError {
 public:
  using PlanningError::PlanningError;
};

}  // namespace tomo
