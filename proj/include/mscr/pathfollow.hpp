#pragma once

#include "mscr/jacobian.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mscr::pathfollow {

using elastica::Actuation;
using elastica::PlaneConfig;
using elastica::RobotParams;
using elastica::Shape;

using Matrix32 = Eigen::Matrix<double, 3, 2>;

/** @brief Displacement of the proximal end along x^. */
struct BaseState {
    double nu = 0.0;
    double nu_min = -0.05;
    double nu_max = 0.05;
    bool within() const { return nu >= nu_min && nu <= nu_max; }
};

/// Proximal offset along x^ plus the body end point. The magnet pose is held in the base frame.
Vec3 tip_position(const Shape& shape, double nu, const PlaneConfig& plane = {});
Vec3 tip_position(const RobotParams& params, const Actuation& act, double nu,
                  const PlaneConfig& plane = {}, const elastica::SolverOptions& opts = {});

struct TaskJacobian {
    Matrix32 B = Matrix32::Zero();  // [d x_L / d nu, d x_L / d psi]
    double condition = 0.0;
};

TaskJacobian task_jacobian(const Shape& shape, const jacobian::JacobianProfile& profile,
                           const PlaneConfig& plane = {});

double condition_number(const Matrix32& B);

/**
 * @brief u = B+ (xr_dot + k_x (x_ref - x)), as (nu_dot, psi_dot).
 * @throws SingularityError when cond(B) exceeds `max_condition`.
 */
Eigen::Vector2d pseudo_inverse_control(const Matrix32& B, const Vec3& x, const Vec3& x_ref,
                                       const Vec3& x_ref_dot, double k_x = defaults::kTaskGain,
                                       double max_condition = defaults::kSingularCondition);

struct PathSpec {
    std::vector<Vec3> waypoints;
    double advance_threshold = defaults::kAdvanceThreshold;  // relative error change over the window
    int advance_window = defaults::kAdvanceWindow;
    double advance_tolerance = defaults::kAdvanceTolerance;  // m
};

/// CSV with header x_m,y_m,z_m.
PathSpec read_path(const std::filesystem::path& path);
void write_path(const std::filesystem::path& path, const PathSpec& spec);

struct PathConfig {
    double height = defaults::kMagnetHeight;  // magnet above the undeformed tip
    double moment = defaults::kMagnetMoment;
    PlaneConfig plane;
    double k_x = defaults::kTaskGain;
    double dt = 0.1;
    double base_rate_limit = defaults::kBaseRateLimit;
    double psi_rate_limit = defaults::kPsiRateLimit;
    double nu_min = -0.05, nu_max = 0.05;
    double max_condition = defaults::kSingularCondition;
    int step_budget = defaults::kWaypointStepBudget;  // per waypoint
    int workspace_samples = 200;
    elastica::SolverOptions solver;

    Actuation actuation(const RobotParams& params, double psi) const;
};

/** @brief Tip positions over the monotone psi branch between the tip-angle extremes, at nu = 0. */
struct Workspace {
    double psi_lo = 0.0, psi_hi = 0.0;   // psi_hi may exceed pi; the branch runs upward
    std::vector<double> psi;
    std::vector<Vec3> tip;
    double y_lo = 0.0, y_hi = 0.0;       // in-plane transverse extent
    double nu_min = 0.0, nu_max = 0.0;
    /// In-plane coordinates (along x^, along o^) of a point.
    static Eigen::Vector2d in_plane(const Vec3& p, const PlaneConfig& plane);
};

Workspace compute_workspace(const RobotParams& params, const PathConfig& cfg);

struct Pose {
    double nu = 0.0;
    double psi = 0.0;
};

/// Base offset and psi placing the tip on `target`. Throws DomainError outside the workspace.
Pose inverse_tip(const RobotParams& params, const PathConfig& cfg, const Workspace& ws,
                 const Vec3& target);

struct PathRow {
    double t = 0.0;
    Vec3 x_ref = Vec3::Zero();
    Vec3 x = Vec3::Zero();
    double nu = 0.0;
    double psi = 0.0;
    int waypoint = 0;
};

struct PathResult {
    std::vector<PathRow> rows;
    int waypoints_reached = 0;
    bool timeout = false;
    bool aborted = false;
    std::string message;
    double rmse = 0.0;      // m, distance of the tip trace to the reference polyline
    double rmse_pct = 0.0;  // % of L
    bool completed() const { return !timeout && !aborted; }
};

double polyline_distance(const Vec3& p, const std::vector<Vec3>& polyline);

/// Regulate to each waypoint in turn, advancing once the error plateaus.
PathResult follow_path(const RobotParams& params, const PathSpec& path, const PathConfig& cfg);

void write_path_trace(const std::filesystem::path& path, const PathResult& result);

/// Two joined circular arcs (an S) spanning `fill` of the transverse workspace.
PathSpec two_arc_path(const Workspace& ws, const PlaneConfig& plane, int samples, double fill = 0.7);
/// Transverse oscillation combined with base travel `span` along x^.
PathSpec base_augmented_path(const Workspace& ws, const PlaneConfig& plane, int samples,
                             double span = 0.01, double fill = 0.7);

}  // namespace mscr::pathfollow
