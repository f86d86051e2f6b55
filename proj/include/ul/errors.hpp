#pragma once

#include <stdexcept>
#include <string>

namespace ul {

// A caller broke an operation's precondition (bad dimension, 0 not in a set, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical property that must always hold did not (e.g. a Turan violation).
class AssertionFailure : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace ul
