#pragma once

#include <stdexcept>
#include <string>

namespace glimit {

// Bad run configuration (invalid flag values, scale-guard violations, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: non-finite values, solver non-convergence, lost ellipticity.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse (consumed tape, dimension mismatch, point outside domain).
struct UsageError : std::logic_error {
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

} // namespace glimit
