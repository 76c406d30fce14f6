#pragma once

#include <stdexcept>
#include <string>

namespace aggdiff {

// Bad values handed to an operation (non-finite input, empty ensemble, ...).
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Inconsistent solver or table parameters; the CLI maps this to exit code 2.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Argument outside the domain of a pressure law or double well.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Non-convergence, NaN, lost mass through a truncated boundary.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Hard-sphere overlap that could not be repaired.
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aggdiff
