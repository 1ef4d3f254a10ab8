#pragma once

#include <stdexcept>
#include <string>

namespace bimodal {

// Invalid configuration or malformed input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: ledger drift, window too narrow, quadrature or root
// search non-convergence. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bimodal
