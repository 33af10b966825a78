#pragma once

#include <stdexcept>
#include <string>

namespace simlab {

// Root of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter is outside its admissible range (p outside [1/2,1], T <= 0, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Input data is malformed (empty sample, bad covariate value, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A procedure cannot produce a probability yet; callers fall back to
// complete randomization.
class NotReady : public Error {
 public:
  using Error::Error;
};

// A model or test cannot be estimated from the data at hand.
class NotEstimable : public Error {
 public:
  using Error::Error;
};

// Operation is not defined for the given procedure.
class Unsupported : public Error {
 public:
  using Error::Error;
};

// Configuration or schema problem (unknown procedure id, bad JSON field).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace simlab
