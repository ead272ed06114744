#pragma once

#include <stdexcept>
#include <string>

namespace szc {

// Root bracketing lost track of a root (e.g. two roots inside one bracket at
// a near-degeneracy).  The message names the offending k-interval.
struct BracketingError : std::runtime_error {
  explicit BracketingError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical result failed its convergence requirement (norm drift, budget).
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace szc
