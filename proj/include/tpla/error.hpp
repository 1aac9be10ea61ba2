#pragma once

#include <stdexcept>
#include <string>

namespace tpla {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration, plan or spec violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An iterative routine hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed container, JSON document or file.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

inline void require_shape(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace detail
}  // namespace tpla
