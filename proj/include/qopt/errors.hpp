#pragma once

#include <stdexcept>
#include <string>

namespace qopt {

// Thrown when a runtime contract of one of the quantized algorithms fails:
// a quantizer distance precondition, a convergence bound, or a state
// invariant. The message names the violated inequality. Maps to exit code 2
// in the CLI.
struct invariant_violation : std::runtime_error {
  explicit invariant_violation(const std::string& what_arg)
      : std::runtime_error(what_arg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw invariant_violation(msg);
}

inline void require_input(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace qopt
