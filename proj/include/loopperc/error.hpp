#pragma once

#include <stdexcept>
#include <string>

namespace loopperc {

// Every failure surfaced by the library derives from Error. The CLI maps the
// subclasses onto exit codes (config 2, numeric 3, budget 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad parameters, invalid vertex ids, inconsistent sets.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Configuration-file problems; messages carry a JSON path like "$.graph.radius".
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A connected component without any killing: the Green's function does not exist.
class NotTransientError : public NumericError {
 public:
  using NumericError::NumericError;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace loopperc
