#pragma once

#include <stdexcept>
#include <string>

namespace genemut {

// Shape/size disagreement between operands.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf produced, degenerate softmax row, poisoned optimizer step.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken API contract (non-scalar backward seed, missing gradient, bad
// hyperparameter).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input files.
struct IngestionError : std::runtime_error {
    explicit IngestionError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace genemut
