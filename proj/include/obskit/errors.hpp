#pragma once

#include <stdexcept>
#include <string>

namespace obskit {

/// Base class for all obskit runtime failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad dimensions, unknown ids, malformed files.
struct ConfigError : Error {
    using Error::Error;
};

/// A state became non-finite during integration. Carries the time of failure.
struct IntegrationError : Error {
    IntegrationError(const std::string& what, double t_fail)
        : Error(what), t(t_fail) {}
    double t;
};

/// Input left the validity domain of a map (duty cycle, division guard, ...).
struct DomainError : Error {
    using Error::Error;
};

/// The rank condition of an observer manifold failed numerically.
struct SingularManifoldError : Error {
    SingularManifoldError(const std::string& what, double t_fail)
        : Error(what), t(t_fail) {}
    double t;
};

}  // namespace obskit
