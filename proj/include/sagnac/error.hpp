// error.hpp -- exception types shared by the sagnac library

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sagnac {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Grid or filter too coarse to resolve the feature being sampled.
struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a rate limit has no finite value (zero dead time).
// `input_rate` carries the trigger rate the caller should fall back to.
struct UnboundedRate : std::domain_error {
    double input_rate;
    UnboundedRate(const std::string& what, double rate)
        : std::domain_error(what), input_rate(rate) {}
};

enum class ConfigFault { MissingFile, Parse, Constraint };

struct ConfigError : std::runtime_error {
    ConfigFault fault;
    std::string key;
    ConfigError(ConfigFault f, std::string k, const std::string& what)
        : std::runtime_error(k.empty() ? what : k + ": " + what), fault(f), key(std::move(k)) {}
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace sagnac
