#pragma once

#include <stdexcept>
#include <string>

namespace gramis {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Bad scalar or structural parameter (dimension < 1, non-positive scale, empty box, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class AllNegInfinity : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class NonSmoothAtMean : public Error {
 public:
  using Error::Error;
};

class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

class RequiresKnownZ : public Error {
 public:
  using Error::Error;
};

class MissingTruth : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require_same_dim(long a, long b, const char* what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(a) +
                            ", got " + std::to_string(b));
  }
}

}  // namespace gramis
