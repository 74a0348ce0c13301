#pragma once

#include <stdexcept>
#include <string>

namespace hmdsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or precondition violation on a public operation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Promotion would push local usage past the hard LOW watermark.
class WatermarkViolation : public Error {
 public:
  using Error::Error;
};

// Telemetry ordering bug: fault on an unmarked page, A <= M, etc.
class TelemetryError : public Error {
 public:
  using Error::Error;
};

// Malformed trace, agent or config file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmdsim
