#pragma once

#include "mscr/elastica.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mscr::control {

using elastica::Actuation;
using elastica::PlaneConfig;
using elastica::RobotParams;

/** @brief Linear extended state observer: output estimate and lumped-disturbance estimate. */
struct LesoState {
    double x1 = 0.0;  // rad
    double x2 = 0.0;  // rad/s
    double beta1 = defaults::kLesoBeta1;
    double beta2 = defaults::kLesoBeta2;
    double eps = defaults::kLesoEps;
};

/// Explicit Euler step of the observer for measurement y and input u through J.
LesoState leso_step(const LesoState& s, double y, double u, double J, double dt);

/// Transition matrix of the discrete estimation error for step dt.
Eigen::Matrix2d leso_error_transition(const LesoState& s, double dt);
double spectral_radius(const Eigen::Matrix2d& A);

/** @brief Second-order linear tracking differentiator. */
struct TdState {
    double y = 0.0;   // smoothed reference
    double dy = 0.0;  // its derivative
    double speed = defaults::kTdSpeed;
    double k1 = defaults::kTdK1;
    double k2 = defaults::kTdK2;
};

TdState td_step(const TdState& s, double y_r, double dt);

/// u0 = dy_r + k (y_r - x1)
double control_pd(const TdState& td, double x1, double k);

enum class Variant { Pd, Qsc, DampedQsc };
const char* variant_name(Variant v);
Variant parse_variant(const std::string& s);

/// How the damped variant inverts J near zero.
enum class DampingForm {
    Continuous,  ///< 1/J outside the band, J/lambda^2 inside
    Piecewise    ///< 1/damped_jacobian(J)
};

/**
 * @brief u = (u0 - x2) / J with optional damping. The PD variant returns u0.
 * @throws SingularityError for the undamped variant at J = 0.
 */
double control_qsc(double u0, double x2, double J, Variant variant, double lambda,
                   DampingForm form = DampingForm::Continuous);

struct ControllerConfig {
    Variant variant = Variant::DampedQsc;
    double gain = defaults::kGain;
    double lambda = defaults::kDamping;
    double psi_min = -defaults::kJointLimit;
    double psi_max = defaults::kJointLimit;
    std::optional<double> rate_limit;  // rad/s
    DampingForm damping = DampingForm::Continuous;
    bool exact_jacobian = false;       // recompute J online instead of the table
    int table_points = defaults::kJacobianTablePoints;
    LesoState leso;
    TdState td;
};

struct Reference {
    enum class Kind { Step, Cosine };
    Kind kind = Kind::Step;
    double amplitude = 0.05;  // rad
    double period = 10.0;     // s, cosine
    double phase = 0.0;       // rad, cosine
    double offset = 0.0;      // rad
    double start = 0.0;       // s, step time
    /// Amplitude counts beyond the workspace edge on the side of its sign.
    bool unreachable = false;

    double value(double t) const;
};

struct Disturbance {
    enum class Kind { None, Step, Ramp, Noise };
    Kind kind = Kind::None;
    double magnitude = 0.0;  // rad (step, noise std) or rad/s (ramp)
    double start = 0.0;      // s
    double bandwidth = 1.0;  // Hz, noise low-pass corner
    double measurement_noise = 0.0;  // rad std added to the measured output
};

struct SimOptions {
    double dt = defaults::kDt;
    double duration = defaults::kDuration;
    std::uint64_t seed = 1;
    std::optional<double> td_initial;  // start the TD at this value instead of the output
    /// Sensor model for the tip angle; the solver value when empty.
    std::function<double(const elastica::Shape&)> sensor;
    elastica::SolverOptions solver;
};

struct TraceRow {
    double t, y_r, y_r_tracked, theta, x1, x2, u, psi;
};

struct SimTrace {
    std::vector<TraceRow> rows;
    double dt = 0.0;
    bool limit_hit = false;
    bool aborted = false;
    std::string abort_reason;
    double workspace_min = 0.0, workspace_max = 0.0;  // filled for unreachable references
};

/// Nominal J_psi tabulated over psi and linearly interpolated.
class JacobianTable {
public:
    JacobianTable() = default;
    JacobianTable(const RobotParams& params, const Actuation& act, const PlaneConfig& plane,
                  double psi_lo, double psi_hi, int points,
                  const elastica::SolverOptions& opts = {});
    double operator()(double psi) const;
    const std::vector<double>& psi() const { return psi_; }
    const std::vector<double>& values() const { return J_; }

private:
    std::vector<double> psi_, J_;
};

/**
 * @brief Closed loop of TD, LESO and control law around the quasi-static rod.
 * Plant solver failures stop the loop and return the partial trace flagged aborted.
 */
SimTrace simulate_closed_loop(const RobotParams& params, const Actuation& act0,
                              const PlaneConfig& plane, const ControllerConfig& cfg,
                              const Reference& ref, const Disturbance& dist,
                              const SimOptions& opts);

struct Metrics {
    double overshoot_pct = 0.0;
    double steady_state_error = 0.0;  // mean |y_r - y| over the final 20 %
    double rmse = 0.0;
    double control_energy = 0.0;      // integral of u^2
};

Metrics trace_metrics(const SimTrace& trace);

/// Sign changes of u on [t0, t1], ignoring |u| below deadband.
int sign_flips(const SimTrace& trace, double t0, double t1, double deadband = 1e-6);

void write_trace(const std::filesystem::path& path, const SimTrace& trace);

}  // namespace mscr::control
