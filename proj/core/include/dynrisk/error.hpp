#pragma once

#include <stdexcept>
#include <string>

namespace dynrisk {

// Malformed or inconsistent input: bad windows, non-measurable events,
// invalid probabilities, and so on.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An enumeration (rearrangement class, tuple product, closure check) would
// exceed its configured cap. Never silently truncated.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A property that holds by construction failed at runtime. Indicates a bug
// or a corrupted input that slipped past validation.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dynrisk
