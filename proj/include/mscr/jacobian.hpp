#pragma once

#include "mscr/elastica.hpp"

#include <vector>

namespace mscr::jacobian {

using elastica::Actuation;
using elastica::PlaneConfig;
using elastica::RobotParams;
using elastica::Shape;
using elastica::SolverOptions;

/// Coefficients of J'' = q J + r at grid nodes and cell midpoints.
struct SlCoefficients {
    std::vector<double> q, r;          // nodes 0..N
    std::vector<double> q_mid, r_mid;  // cells 0..N-1
};

/// q = d sigma / d theta (second field gradient dropped), r = d sigma / d psi.
SlCoefficients sl_coefficients(const Shape& shape, const Actuation& act,
                               const RobotParams& params, const PlaneConfig& plane = {});

struct LipschitzReport {
    double K = 0.0;              // 1/m^2
    double field_max = 0.0;      // T, max |b| over the body
    double gradient_max = 0.0;   // T/m, max Frobenius norm of grad b over the body
    double hessian_term = 0.0;   // second gradient contribution, dropped
    bool admissible = false;     // K inside the admissible set
    int branch = -1;             // index k of the admissible interval, -1 if none
};

/// Admissible set [0, pi^2/4L^2] U [((4k-1) pi / 2L)^2, ((4k+1) pi / 2L)^2], k >= 1.
bool in_admissible_set(double K, double length, int* branch = nullptr);

LipschitzReport lipschitz_K(const RobotParams& params, const Actuation& act, const Shape& shape,
                            const PlaneConfig& plane = {});

enum class Method { Analytical, FallbackJ1, Numeric };
const char* method_name(Method m);

struct JacobianProfile {
    double length = 0.0;
    std::vector<double> J;   // dtheta/dpsi along the body
    std::vector<double> dJ;
    double tip = 0.0;        // J_psi = J(L)
    Method method = Method::Analytical;
    double v = 0.0;          // weight of the homogeneous solution
    LipschitzReport lipschitz;
};

/**
 * @brief Sensitivity of the shape to psi from two initial-value problems on the shape grid.
 * @throws Error when the homogeneous solution contradicts the admissibility claim.
 */
JacobianProfile analytic_jacobian(const Shape& shape, const Actuation& act,
                                  const RobotParams& params, const PlaneConfig& plane = {});

/// Central difference of the tip angle in psi, warm-started from `warm` when given.
double numeric_jacobian(const RobotParams& params, const Actuation& act,
                        const PlaneConfig& plane = {}, double delta = defaults::kPsiStep,
                        const SolverOptions& opts = {}, const Shape* warm = nullptr);

/// Central differences of the tip angle in each magnet position component.
Eigen::RowVector3d position_jacobian(const RobotParams& params, const Actuation& act,
                                     const PlaneConfig& plane = {},
                                     double delta = defaults::kMagnetStep,
                                     const SolverOptions& opts = {});

struct SingularityRow {
    double height = 0.0;
    double psi_min = 0.0;  // J_psi crosses - to +, tip angle minimum
    double psi_max = 0.0;  // J_psi crosses + to -, tip angle maximum
};

/// Zero crossings of the analytic J_psi over one period, per magnet height above the tip.
std::vector<SingularityRow> singularity_table(const RobotParams& params,
                                              const std::vector<double>& heights, double moment,
                                              const PlaneConfig& plane = {},
                                              int grid_points = 64,
                                              const SolverOptions& opts = {});

/// Analytic J_psi at one actuation (solves the shape first).
double tip_jacobian(const RobotParams& params, const Actuation& act, const PlaneConfig& plane = {},
                    const SolverOptions& opts = {}, double* tip_angle = nullptr,
                    double* initial_slope = nullptr);

/// J if |J| >= lambda, else sgn(J) lambda with sgn(0) = +1.
double damped_jacobian(double J, double lambda);

/// Reciprocal that follows 1/J outside [-lambda, lambda] and J/lambda^2 inside.
double damped_inverse(double J, double lambda);

}  // namespace mscr::jacobian
