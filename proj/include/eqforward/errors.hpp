// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace eqf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (bad rows, bad numbers, bad headers).
struct ParseError : Error {
    using Error::Error;
};

// Structurally incomplete or mismatched data (missing grid cells, size mismatch).
struct DimensionError : Error {
    using Error::Error;
};

// A value outside its admissible range (negative spot without the allow flag, ...).
struct ValueError : Error {
    using Error::Error;
};

struct EmptySampleError : Error {
    using Error::Error;
};

// Operation incompatible with the agent kind (e.g. a generator asked to buy).
struct KindMismatchError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Tree topology impossible for the member counts at hand.
struct TopologyError : Error {
    using Error::Error;
};

// Bisection bracket does not straddle a sign change.
struct NoBracketError : Error {
    using Error::Error;
};

// Linear algebra failure the solver could not recover from.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace eqf
