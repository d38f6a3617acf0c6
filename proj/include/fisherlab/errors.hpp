#pragma once

#include <stdexcept>
#include <string>

namespace fisherlab {

struct NonpositivePriceError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ZeroUtilityError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateBuyerError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedGoodError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TypeMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config parse/validation failure; `field` names the offending key or row.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& msg)
      : std::runtime_error(f + ": " + msg), field(std::move(f)) {}
};

}  // namespace fisherlab
