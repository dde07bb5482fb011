#pragma once

#include <stdexcept>
#include <string>

namespace impactbench {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched dimensions or element counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value outside its admissible range (non-finite, negative, > 1, ...).
class RangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace impactbench
