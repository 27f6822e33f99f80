#pragma once

#include <stdexcept>
#include <string>

namespace plae {

// Shape or dimension violation in a tensor operation.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed, truncated, or inconsistent input file (IDX, CIFAR binary, checkpoints).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration (bad key, bad value, impossible combination).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Misuse of the autodiff tape: double backward, missing gradient, non-scalar loss.
struct AutodiffError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace plae
