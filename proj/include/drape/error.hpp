#pragma once

#include <stdexcept>
#include <string>

namespace drape {

/// Malformed or contract-violating input (bad file, invalid plan, bad index).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while running an otherwise well-formed request.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drape
