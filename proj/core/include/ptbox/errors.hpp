#pragma once

#include <stdexcept>
#include <string>

namespace ptbox {

// Bad configuration: unknown keys, invalid enum values, inconsistent settings.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data: missing files, malformed lines, checkpoint corruption,
// vocabulary mismatches.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-finite intermediate values, conditioning on a
// near-empty box, diverging loss.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ptbox
