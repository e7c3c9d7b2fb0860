#pragma once

#include "mscr/common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mscr::magnetics {

/// Frame in which a unit moment direction is expressed.
enum class Frame {
    Magnet,  ///< magnet frame, m = [cos psi, sin psi, 0]
    Body     ///< robot base frame with roll phi = 0, m = [-cos psi, sin psi, 0]
};

Vec3 unit_moment(double psi, Frame frame);

/// Unit moment in the robot base frame for a magnet rotated by psi in the phi-plane.
Vec3 unit_moment_in_plane(double psi, double phi);
/// Derivative of unit_moment_in_plane with respect to psi.
Vec3 unit_moment_in_plane_dpsi(double psi, double phi);

/** @brief Actuating permanent magnet. */
struct DipoleMagnet {
    Vec3 position = Vec3::Zero();  // m, robot base frame
    double psi = 0.0;              // rad, never wrapped
    double moment = 0.0;           // A*m^2
};

/// b = mu0 M / (4 pi |p|^3) (3 p^ p^T - I) m^
Vec3 dipole_field(const Vec3& p, const Vec3& m_hat, double moment);

/// Spatial gradient (symmetric, traceless) of dipole_field with respect to p.
Mat3 dipole_gradient(const Vec3& p, const Vec3& m_hat, double moment);

/// Matrix Bbar(p) with Bbar * m^ == dipole_field(p, m^, moment).
Mat3 field_operator(const Vec3& p, double moment);

/// Matrix Bg(p, v) with Bg * m^ == dipole_gradient(p, m^, moment)^T * v.
Mat3 gradient_operator(const Vec3& p, const Vec3& v, double moment);

/// Field magnitude on the principal axis at distance d: mu0 M / (2 pi d^3).
double on_axis_field(double d, double moment);

struct FieldSample {
    double distance = 0.0;   // m
    double magnitude = 0.0;  // T
};

struct WorkingRange {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double d) const { return d >= lo && d <= hi; }
};

struct CalibrationResult {
    double moment = 0.0;
    int samples_used = 0;
    double residual_rms = 0.0;  // T
};

/**
 * @brief Least-squares moment fit against the on-axis model over samples inside the range.
 * @throws CalibrationError when no sample lies in the range.
 */
CalibrationResult calibrate_moment(std::span<const FieldSample> samples, WorkingRange range);

/// On-axis samples from the dipole model with multiplicative Gaussian noise (sigma = rel_noise).
std::vector<FieldSample> synthetic_samples(double moment, WorkingRange range, int count,
                                           double rel_noise, std::uint64_t seed);

std::vector<FieldSample> read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, std::span<const FieldSample> samples);

}  // namespace mscr::magnetics
