#pragma once

#include <stdexcept>
#include <string>

namespace ecgad {

// Error taxonomy. The CLI maps these onto its exit-code contract:
// ConfigError -> 2, DataError -> 3, NumericError -> 4, anything else -> 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition or internal invariant (caller bug, not bad input).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace ecgad
