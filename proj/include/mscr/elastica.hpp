#pragma once

#include "mscr/common.hpp"
#include "mscr/defaults.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mscr::elastica {

/** @brief Physical parameters of the rod. */
struct RobotParams {
    double length = 0.0;         // L, m
    double radius = 0.0;         // r, m
    double youngs_modulus = 0.0; // E, Pa
    double magnetization = 0.0;  // M, A/m

    double area() const { return kPi * radius * radius; }
    double second_moment() const { return kPi * radius * radius * radius * radius / 4.0; }
    double bending_stiffness() const { return youngs_modulus * second_moment(); }
    /// A/(EI), the prefactor of the magnetic load in the rod equation.
    double load_factor() const { return area() / bending_stiffness(); }

    /// Throws ConfigError for non-positive values.
    void validate() const;
    /// False when the rod is too stubby for the slender-rod model (L / 2r < 5).
    bool slender() const { return length / (2.0 * radius) >= 5.0; }

    static RobotParams mscr1();
    static RobotParams mscr2();
};

/** @brief Deflection plane selected by the roll angle phi about x^. */
struct PlaneConfig {
    double phi = 0.0;

    Vec3 axis_o() const;   // in-plane transverse axis [0, cos phi, sin phi]
    Vec3 normal() const;   // [0, sin phi, -cos phi]
    /// a x^ + b o^
    Vec3 in_plane(double a, double b) const { return Vec3(a, 0.0, 0.0) + b * axis_o(); }
};

/** @brief Magnet pose and strength in the robot base frame. */
struct Actuation {
    Vec3 magnet_position = Vec3::Zero();
    double psi = 0.0;
    double moment = 0.0;

    /// Magnet at height H over the distal end of the undeformed rod, in the phi-plane.
    static Actuation above_tip(const RobotParams& params, double height, double psi,
                               double moment, const PlaneConfig& plane = {});
};

/** @brief Discretized equilibrium shape on a uniform arc-length grid. */
struct Shape {
    double length = 0.0;
    std::vector<double> theta;   // rad
    std::vector<double> dtheta;  // rad/m
    std::vector<double> xc;      // int_0^s cos(theta)
    std::vector<double> ys;      // int_0^s sin(theta)
    int iterations = 0;
    double residual = 0.0;       // theta'(L)
    double slope_derivative = 1.0;  // d theta'(L) / d theta'(0) at the solution

    int intervals() const { return static_cast<int>(theta.size()) - 1; }
    double step() const { return length / intervals(); }
    double arc(int i) const { return step() * i; }
    double tip_angle() const { return theta.back(); }
    double initial_slope() const { return dtheta.front(); }

    /// Shape from sampled angles; integrals and slopes by trapezoid / differences.
    static Shape from_angles(double length, std::vector<double> theta);
    static Shape straight(double length, int intervals);
};

Vec3 body_point(const Shape& shape, double s, const PlaneConfig& plane);
Vec3 dx_dtheta(const Shape& shape, double s, const PlaneConfig& plane);

/// Local body state entering the load term.
struct BodyState {
    double theta = 0.0;
    double xc = 0.0;
    double ys = 0.0;
};

/**
 * @brief theta'' = sigma for the body state at one material point.
 * @throws DomainError when the point coincides with the magnet.
 */
double rhs_sigma(const BodyState& st, const Actuation& act, const RobotParams& params,
                 const PlaneConfig& plane);
double rhs_sigma(const Shape& shape, double s, const Actuation& act, const RobotParams& params,
                 const PlaneConfig& plane);

/// Row vector with sigma = row . m^(psi); independent of psi.
Vec3 sigma_row(const BodyState& st, const Actuation& act, const RobotParams& params,
               const PlaneConfig& plane);

struct SolverOptions {
    int intervals = defaults::kGridNodes;
    double tolerance = defaults::kShootingTolerance;
    int max_iterations = defaults::kShootingMaxIterations;
    std::optional<double> initial_slope;       // warm start for theta'(0)
};

/**
 * @brief Shooting solve of theta'' = sigma, theta(0) = 0, theta'(L) = 0.
 *
 * Newton on theta'(0); each iteration integrates a nominal and a nudged trajectory
 * in one RK4 pass, giving the residual and its slope together. Bisection takes over
 * once a sign change is bracketed and a Newton step leaves the bracket.
 * @throws SolverError on non-convergence, DomainError on Assumption-1 violation.
 */
Shape solve_bvp(const RobotParams& params, const Actuation& act, const PlaneConfig& plane = {},
                const SolverOptions& opts = {});

double tip_angle(const RobotParams& params, const Actuation& act, const PlaneConfig& plane = {},
                 const SolverOptions& opts = {});

/// Distance bound (mu0 M_A M A L^2 / (pi E I))^(1/3) below which stability is not guaranteed.
double distance_threshold(const RobotParams& params, double moment);

struct FeasibilityReport {
    double min_distance = 0.0;  // min over the body grid of |p_A - x(s)|
    double threshold = 0.0;     // distance_threshold
    double cell = 0.0;          // grid cell length used for the clearance check
    bool clearance_ok = false;  // magnet farther than one cell from every body point
    bool threshold_ok = false;  // min_distance > threshold
    bool slender = true;
    bool in_plane = true;       // magnet lies in the phi-plane
    bool feasible() const { return clearance_ok && threshold_ok && in_plane; }
};

/// Pure diagnosis; uses the given shape or the undeformed rod.
FeasibilityReport feasibility_check(const RobotParams& params, const Actuation& act,
                                    const PlaneConfig& plane = {}, const Shape* shape = nullptr,
                                    int intervals = defaults::kGridNodes);

struct SweepPoint {
    double psi = 0.0;
    double theta_tip = 0.0;
    int iterations = 0;
    double initial_slope = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    double psi_min = 0.0, psi_max = 0.0;      // actuator angles of the tip-angle extremes
    double theta_min = 0.0, theta_max = 0.0;  // workspace [theta_min, theta_max]
    double mean_iterations = 0.0;
    double width() const { return theta_max - theta_min; }
};

/**
 * @brief Tip angle over a psi grid with warm starts; extremes refined by golden section.
 * The grid must be increasing and span one full period.
 */
SweepResult workspace_sweep(const RobotParams& params, const Vec3& magnet_position, double moment,
                            std::span<const double> psi_grid, const PlaneConfig& plane = {},
                            const SolverOptions& opts = {});

/// Uniform grid of n points on [lo, lo + 2 pi) .
std::vector<double> periodic_grid(int n, double lo = -kPi);

struct SinusoidDecomposition {
    Vec3 row = Vec3::Zero();  // theta_L = row . m^(psi)
    double along_x = 0.0;     // row . x^
    double along_o = 0.0;     // row . o^
    double amplitude = 0.0;   // sgn(row_o) * |(row_x, row_o)|
    double phase = 0.0;       // atan(row_x / row_o)
    /// -row_x cos psi + row_o sin psi
    double predict(double psi) const;
};

SinusoidDecomposition sinusoid_decomposition(const Shape& shape, const Actuation& act,
                                             const RobotParams& params,
                                             const PlaneConfig& plane = {});

}  // namespace mscr::elastica
