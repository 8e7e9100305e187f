#pragma once

#include <stdexcept>
#include <string>

namespace contactplan {

// Vector sizes that do not match the robot's degrees of freedom, or a
// malformed model description.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range or non-finite argument to a numerical routine.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A file could not be read or does not follow its schema.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file parsed, but its contents break a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire message that does not match the protocol schema.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace contactplan
