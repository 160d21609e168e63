#pragma once

#include <stdexcept>
#include <string>

namespace ganlab {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Unbound inputs, backward-before-forward and similar misuse of a Graph.
struct GraphError : std::logic_error {
    using std::logic_error::logic_error;
};

// NaN/Inf in a gradient or loss, or a log of a non-positive value.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateWeightError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ganlab
