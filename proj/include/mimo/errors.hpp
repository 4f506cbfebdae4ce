#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mimo {

// Invalid user-supplied configuration. `field()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Violated precondition of a library call (dimension mismatch, bad sigma, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A detector could not produce an estimate for this instance.
class DetectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A Langevin trajectory left the bounded region or produced non-finite values.
class DivergenceError : public DetectorError {
public:
    DivergenceError(std::size_t level, std::size_t iteration)
        : DetectorError("trajectory diverged at level " + std::to_string(level) + ", iteration " +
                        std::to_string(iteration)),
          level_(level), iteration_(iteration) {}
    std::size_t level() const noexcept { return level_; }
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t level_;
    std::size_t iteration_;
};

} // namespace mimo
