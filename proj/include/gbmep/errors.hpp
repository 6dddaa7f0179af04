#pragma once

#include <stdexcept>
#include <string>

namespace gbmep {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller passed an out-of-contract argument (bad split point, bad radius, ...).
struct argument_error : error {
    using error::error;
};

// A node id or external station id is not registered.
struct registry_error : error {
    using error::error;
};

// Parameter values outside the model's domain (nonpositive rate, alpha >= beta, ...).
struct domain_error : error {
    using error::error;
};

// Overflow/NaN detected while accumulating a numerical quantity.
struct numerical_error : error {
    using error::error;
};

// An input file does not have the expected layout (missing column, bad header).
struct schema_error : error {
    using error::error;
};

} // namespace gbmep
