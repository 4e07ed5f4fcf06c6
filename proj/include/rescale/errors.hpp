#pragma once

#include <stdexcept>
#include <string>

namespace rescale {

// Base for all library-defined failures; std exceptions (invalid_argument,
// out_of_range) are reserved for malformed inputs caught at construction.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A scaling atom is exactly zero where a nonzero one is required.
struct DegenerateZeroError : Error {
    using Error::Error;
};

// HitOne / LatticeReturn requested for a law without exact product bookkeeping.
struct RuleUnconstructibleError : Error {
    using Error::Error;
};

// Every simulated path exceeded the step cap; no stopped sample exists.
struct AllPathsCappedError : Error {
    using Error::Error;
};

// Truncating a shift density dropped more than tail_tol of mass while weight
// renormalization was disabled.
struct QuadratureUnderflowError : Error {
    using Error::Error;
};

// Perpetuity sampling needs every scaling strictly positive.
struct RequiresPositiveAlphaError : Error {
    using Error::Error;
};

// A single stochastic recursion failed to terminate within its cap.
struct CapExceededError : Error {
    using Error::Error;
};

struct EmptySampleError : Error {
    using Error::Error;
};

// Operation called on a law outside its regime (e.g. unit-modulus analysis on
// a law with P(|alpha| = 1) < 1).
struct InapplicableError : Error {
    using Error::Error;
};

// Finite-difference stencil cannot certify the requested tolerance at this dx.
struct GridTooCoarseError : Error {
    using Error::Error;
};

}  // namespace rescale
