#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace mscr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;  // T*m/A
inline constexpr double kPi = std::numbers::pi;

/** @brief Base of all toolkit errors. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the domain of a model (e.g. field evaluated at the dipole).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Shooting or IVP solver did not converge.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Control or Jacobian inversion hit a singular configuration.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Conic fitting or tip tracing failed on an image.
class FitError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mscr
