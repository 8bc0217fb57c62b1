#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Input that violates a documented contract (schema, range, invariant).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures: unreadable input, unwritable output.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace forge
