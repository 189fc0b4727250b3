#pragma once

#include <stdexcept>
#include <string>

namespace spatlog {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Kernel parameters that make the kernel degenerate (σ ≤ 0, R ≤ 0, bad table).
struct InvalidKernel : Error {
    using Error::Error;
};

/// Model parameters violating a structural invariant (cutoff > L/2, d ∉ {1,2}, ...).
struct InvalidModel : Error {
    using Error::Error;
};

/// Particle-number cap larger than the number of lattice sites, or lattice too large.
struct InvalidTruncation : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

/// Kirkwood closure evaluated at vanishing density.
struct ClosureSingularity : Error {
    using Error::Error;
};

/// An integrator detected blow-up; `time` is the last finite time reached.
struct DivergenceError : Error {
    DivergenceError(const std::string& what, double t) : Error(what), time(t) {}
    double time;
};

}  // namespace spatlog
