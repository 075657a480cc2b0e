#pragma once

#include <stdexcept>
#include <string>

namespace netcf {

// Invalid user-supplied configuration (bad design, bad batch params, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

// Violated call contract between components (shape mismatch, misaligned panels).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};

struct IndexError : std::out_of_range {
    explicit IndexError(const std::string& m) : std::out_of_range(m) {}
};

// An estimator cannot be fit or evaluated on the given data.
struct EstimatorError : std::runtime_error {
    explicit EstimatorError(const std::string& m) : std::runtime_error(m) {}
};

// Normal equations singular or numerically unusable.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& m) : std::runtime_error(m) {}
};

struct RoutingError : std::runtime_error {
    explicit RoutingError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

} // namespace netcf
