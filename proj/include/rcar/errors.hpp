#pragma once

#include <stdexcept>
#include <string>

namespace rcar {

/// Invalid parameters or malformed model specification.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numeric routine could not deliver a trustworthy result
/// (guard tripped, iteration budget exhausted, cross-check failed).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two routes that must agree produced contradictory results.
/// Indicates a bug in this library, not a property of the model.
class InternalInconsistency : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace rcar
