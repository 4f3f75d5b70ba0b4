#pragma once

#include <stdexcept>
#include <string>

namespace dcnet {

// Error taxonomy. Each maps onto one CLI exit-code class; see tools/.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension disagreement (mismatched shapes, zero dims, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Invalid scalar argument (fan_in = 0, nonpositive learning rate, ...).
struct ParamError : Error {
    using Error::Error;
};

// Invalid model/training configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Invalid runtime input (unknown layer id, label out of range, ...).
struct InputError : Error {
    using Error::Error;
};

// Operation attempted in the wrong state (backward without cached forward).
struct StateError : Error {
    using Error::Error;
};

// Malformed external data (CSV/checkpoint); message carries file context.
struct FormatError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace dcnet
