#pragma once

#include <stdexcept>
#include <string>

namespace clapper {

// Every error raised for bad caller input derives from InputError so the CLI
// can map it to exit code 1.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class NonFiniteError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace clapper
