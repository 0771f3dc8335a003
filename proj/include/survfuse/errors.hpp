#ifndef SURVFUSE_ERRORS_HPP
#define SURVFUSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace survfuse {

// Shape disagreement between tensors (reports the offending shapes).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: a precondition of the call itself was violated.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Input value outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent user-supplied data (files, manifests, labels).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during optimization (NaN/Inf loss and the like).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace survfuse

#endif
