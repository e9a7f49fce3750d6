#pragma once

#include <stdexcept>
#include <string>

namespace crossalign {

// Error taxonomy. Everything derives from std::runtime_error so callers that
// don't care about the category can still catch one type.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between tensors fed to an op.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// A scalar argument is outside its documented range (temperature <= 0, bad rate, ...).
struct ParameterError : Error {
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

// A documented precondition was violated (empty batch, non-scalar loss, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Token or tensor index out of range.
struct IndexError : Error {
    explicit IndexError(const std::string& msg) : Error(msg) {}
};

// File could not be read/written or has a malformed format.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Bad CLI flag / config file combination.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Training produced a non-finite reconstruction loss.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

}  // namespace crossalign
