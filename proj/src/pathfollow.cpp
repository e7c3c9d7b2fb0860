#include "mscr/pathfollow.hpp"

#include "mscr/io.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mscr::pathfollow {

Vec3 tip_position(const Shape& shape, double nu, const PlaneConfig& plane) {
    return Vec3(nu, 0.0, 0.0) + elastica::body_point(shape, shape.length, plane);
}

Vec3 tip_position(const RobotParams& params, const Actuation& act, double nu,
                  const PlaneConfig& plane, const elastica::SolverOptions& opts) {
    return tip_position(elastica::solve_bvp(params, act, plane, opts), nu, plane);
}

namespace {

// Composite Simpson on uniform nodes (trapezoid on a trailing odd cell).
template <typename F>
double integrate_nodes(int n, double h, F f) {
    double sum = 0.0;
    int end = n - (n % 2);
    for (int i = 0; i < end; i += 2) sum += h / 3.0 * (f(i) + 4.0 * f(i + 1) + f(i + 2));
    if (end < n) sum += 0.5 * h * (f(end) + f(n));
    return sum;
}

}  // namespace

double condition_number(const Matrix32& B) {
    Eigen::JacobiSVD<Matrix32> svd(B);
    auto s = svd.singularValues();
    if (!(s[1] > 0.0)) return std::numeric_limits<double>::infinity();
    return s[0] / s[1];
}

TaskJacobian task_jacobian(const Shape& shape, const jacobian::JacobianProfile& profile,
                           const PlaneConfig& plane) {
    const int n = shape.intervals();
    if (static_cast<int>(profile.J.size()) != n + 1)
        throw DomainError("Jacobian profile does not match the shape grid");
    const double h = shape.step();
    double a = -integrate_nodes(n, h, [&](int i) { return std::sin(shape.theta[i]) * profile.J[i]; });
    double b = integrate_nodes(n, h, [&](int i) { return std::cos(shape.theta[i]) * profile.J[i]; });
    TaskJacobian tj;
    tj.B.col(0) = Vec3::UnitX();
    tj.B.col(1) = plane.in_plane(a, b);
    tj.condition = condition_number(tj.B);
    return tj;
}

Eigen::Vector2d pseudo_inverse_control(const Matrix32& B, const Vec3& x, const Vec3& x_ref,
                                       const Vec3& x_ref_dot, double k_x, double max_condition) {
    if (!B.allFinite()) throw DomainError("task Jacobian is not finite");
    Eigen::JacobiSVD<Matrix32> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    auto s = svd.singularValues();
    double cond = s[1] > 0.0 ? s[0] / s[1] : std::numeric_limits<double>::infinity();
    if (cond > max_condition)
        throw SingularityError("task Jacobian is rank deficient (condition " + std::to_string(cond) + ")");
    Vec3 v = x_ref_dot + k_x * (x_ref - x);
    return svd.solve(v);
}

// ---------------------------------------------------------------------------

PathSpec read_path(const std::filesystem::path& path) {
    PathSpec spec;
    for (const auto& r : io::read_numeric_csv(path, {"x_m", "y_m", "z_m"}))
        spec.waypoints.emplace_back(r[0], r[1], r[2]);
    if (spec.waypoints.empty()) throw ConfigError(path.string() + ": path has no waypoints");
    return spec;
}

void write_path(const std::filesystem::path& path, const PathSpec& spec) {
    io::CsvWriter out(path, "x_m,y_m,z_m");
    for (const auto& w : spec.waypoints) out.row({w.x(), w.y(), w.z()});
}

Actuation PathConfig::actuation(const RobotParams& params, double psi) const {
    return Actuation::above_tip(params, height, psi, moment, plane);
}

Eigen::Vector2d Workspace::in_plane(const Vec3& p, const PlaneConfig& plane) {
    return {p.x(), p.dot(plane.axis_o())};
}

Workspace compute_workspace(const RobotParams& params, const PathConfig& cfg) {
    if (cfg.workspace_samples < 3) throw DomainError("workspace needs at least three samples");
    auto grid = elastica::periodic_grid(defaults::kSweepPoints);
    auto sweep = elastica::workspace_sweep(params, cfg.actuation(params, 0.0).magnet_position,
                                           cfg.moment, grid, cfg.plane, cfg.solver);
    Workspace ws;
    ws.psi_lo = sweep.psi_min;
    ws.psi_hi = sweep.psi_max;
    if (ws.psi_hi < ws.psi_lo) ws.psi_hi += 2 * kPi;
    ws.nu_min = cfg.nu_min;
    ws.nu_max = cfg.nu_max;
    ws.y_lo = std::numeric_limits<double>::infinity();
    ws.y_hi = -ws.y_lo;
    elastica::SolverOptions opts = cfg.solver;
    for (int i = 0; i < cfg.workspace_samples; ++i) {
        double psi = ws.psi_lo + (ws.psi_hi - ws.psi_lo) * i / (cfg.workspace_samples - 1);
        Shape s = elastica::solve_bvp(params, cfg.actuation(params, psi), cfg.plane, opts);
        opts.initial_slope = s.initial_slope();
        Vec3 tip = tip_position(s, 0.0, cfg.plane);
        ws.psi.push_back(psi);
        ws.tip.push_back(tip);
        double y = Workspace::in_plane(tip, cfg.plane).y();
        ws.y_lo = std::min(ws.y_lo, y);
        ws.y_hi = std::max(ws.y_hi, y);
    }
    return ws;
}

Pose inverse_tip(const RobotParams& params, const PathConfig& cfg, const Workspace& ws,
                 const Vec3& target) {
    if (std::abs(target.dot(cfg.plane.normal())) > 1e-9)
        throw DomainError("target lies outside the deflection plane");
    const double yt = Workspace::in_plane(target, cfg.plane).y();
    auto y_at = [&](std::size_t i) { return Workspace::in_plane(ws.tip[i], cfg.plane).y(); };
    std::size_t seg = ws.tip.size();
    for (std::size_t i = 0; i + 1 < ws.tip.size(); ++i) {
        double y0 = y_at(i), y1 = y_at(i + 1);
        if ((y0 - yt) * (y1 - yt) <= 0.0 && y0 != y1) {
            seg = i;
            break;
        }
    }
    if (seg == ws.tip.size()) throw DomainError("target is outside the transverse workspace");

    // Secant on the tip's transverse coordinate, bracketed by the sampled segment.
    double p0 = ws.psi[seg], p1 = ws.psi[seg + 1];
    double f0 = y_at(seg) - yt, f1 = y_at(seg + 1) - yt;
    elastica::SolverOptions opts = cfg.solver;
    double psi = p0 - f0 * (p1 - p0) / (f1 - f0);
    Vec3 tip;
    for (int it = 0; it < 50; ++it) {
        Shape s = elastica::solve_bvp(params, cfg.actuation(params, psi), cfg.plane, opts);
        opts.initial_slope = s.initial_slope();
        tip = tip_position(s, 0.0, cfg.plane);
        double f = Workspace::in_plane(tip, cfg.plane).y() - yt;
        if (std::abs(f) < 1e-12) break;
        if (f * f0 < 0.0) {
            p1 = psi;
            f1 = f;
        } else {
            p0 = psi;
            f0 = f;
        }
        if (std::abs(p1 - p0) < 1e-13) break;
        psi = p0 - f0 * (p1 - p0) / (f1 - f0);
    }
    Pose pose{target.x() - tip.x(), psi};
    if (pose.nu < ws.nu_min || pose.nu > ws.nu_max)
        throw DomainError("target needs base travel outside the limits");
    return pose;
}

double polyline_distance(const Vec3& p, const std::vector<Vec3>& polyline) {
    if (polyline.empty()) throw DomainError("empty polyline");
    if (polyline.size() == 1) return (p - polyline.front()).norm();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        Vec3 a = polyline[i], d = polyline[i + 1] - a;
        double len2 = d.squaredNorm();
        double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (p - a - t * d).norm());
    }
    return best;
}

PathResult follow_path(const RobotParams& params, const PathSpec& path, const PathConfig& cfg) {
    params.validate();
    if (path.waypoints.size() < 2) throw DomainError("path needs at least two waypoints");
    if (!(cfg.dt > 0.0)) throw DomainError("time step must be positive");
    if (path.advance_window < 1) throw DomainError("advance window must be at least one step");

    Workspace ws = compute_workspace(params, cfg);
    for (const auto& w : path.waypoints) inverse_tip(params, cfg, ws, w);  // feasibility of every waypoint
    Pose pose = inverse_tip(params, cfg, ws, path.waypoints.front());

    PathResult res;
    double nu = pose.nu, psi = pose.psi, t = 0.0;
    elastica::SolverOptions opts = cfg.solver;
    const double nu_step = cfg.base_rate_limit * cfg.dt, psi_step = cfg.psi_rate_limit * cfg.dt;

    try {
        for (std::size_t k = 1; k < path.waypoints.size(); ++k) {
            const Vec3& target = path.waypoints[k];
            std::deque<double> hist;
            for (int step = 0;; ++step) {
                Actuation act = cfg.actuation(params, psi);
                Shape shape = elastica::solve_bvp(params, act, cfg.plane, opts);
                opts.initial_slope = shape.initial_slope();
                Vec3 x = tip_position(shape, nu, cfg.plane);
                res.rows.push_back({t, target, x, nu, psi, static_cast<int>(k)});

                double e = (target - x).norm();
                hist.push_back(e);
                if (static_cast<int>(hist.size()) > path.advance_window + 1) hist.pop_front();
                bool plateau = false;
                if (static_cast<int>(hist.size()) == path.advance_window + 1 && hist.front() > 0.0)
                    plateau = (hist.front() - e) / hist.front() < path.advance_threshold;
                if (e < path.advance_tolerance || plateau) break;
                if (step >= cfg.step_budget) {
                    res.timeout = true;
                    res.message = "waypoint " + std::to_string(k) + " not reached within the step budget";
                    break;
                }

                auto profile = jacobian::analytic_jacobian(shape, act, params, cfg.plane);
                auto tj = task_jacobian(shape, profile, cfg.plane);
                Eigen::Vector2d u = pseudo_inverse_control(tj.B, x, target, Vec3::Zero(), cfg.k_x,
                                                           cfg.max_condition);
                nu = std::clamp(nu + std::clamp(u[0] * cfg.dt, -nu_step, nu_step), cfg.nu_min, cfg.nu_max);
                psi += std::clamp(u[1] * cfg.dt, -psi_step, psi_step);
                t += cfg.dt;
            }
            if (res.timeout) break;
            res.waypoints_reached = static_cast<int>(k);
        }
    } catch (const Error& e) {
        res.aborted = true;
        res.message = e.what();
    }

    double ss = 0.0;
    for (const auto& r : res.rows) {
        double d = polyline_distance(r.x, path.waypoints);
        ss += d * d;
    }
    res.rmse = res.rows.empty() ? 0.0 : std::sqrt(ss / res.rows.size());
    res.rmse_pct = 100.0 * res.rmse / params.length;
    return res;
}

void write_path_trace(const std::filesystem::path& path, const PathResult& result) {
    io::CsvWriter out(path, "t,x_ref,y_ref,z_ref,x,y,z,nu,psi");
    for (const auto& r : result.rows)
        out.row({r.t, r.x_ref.x(), r.x_ref.y(), r.x_ref.z(), r.x.x(), r.x.y(), r.x.z(), r.nu, r.psi});
}

// ---------------------------------------------------------------------------

namespace {

double center_x(const Workspace& ws) {
    double sum = 0.0;
    for (const auto& p : ws.tip) sum += p.x();
    return sum / ws.tip.size();
}

}  // namespace

PathSpec two_arc_path(const Workspace& ws, const PlaneConfig& plane, int samples, double fill) {
    if (samples < 4) throw DomainError("path needs at least four samples");
    const double yc = 0.5 * (ws.y_lo + ws.y_hi);
    const double R = 0.5 * fill * (ws.y_hi - ws.y_lo);
    const double xs = center_x(ws) - 2.0 * R;
    PathSpec spec;
    for (int i = 0; i < samples; ++i) {
        double u = 2.0 * i / (samples - 1);  // [0, 1] first arc, [1, 2] second
        double x, y;
        if (u <= 1.0) {
            double a = kPi * (1.0 - u);
            x = xs + R + R * std::cos(a);
            y = yc + R * std::sin(a);
        } else {
            double a = kPi * u;
            x = xs + 3.0 * R + R * std::cos(a);
            y = yc + R * std::sin(a);
        }
        spec.waypoints.push_back(plane.in_plane(x, y));
    }
    return spec;
}

PathSpec base_augmented_path(const Workspace& ws, const PlaneConfig& plane, int samples, double span,
                             double fill) {
    if (samples < 4) throw DomainError("path needs at least four samples");
    const double yc = 0.5 * (ws.y_lo + ws.y_hi);
    const double A = 0.5 * fill * (ws.y_hi - ws.y_lo);
    const double xs = center_x(ws) - 0.5 * span;
    PathSpec spec;
    for (int i = 0; i < samples; ++i) {
        double u = static_cast<double>(i) / (samples - 1);
        spec.waypoints.push_back(plane.in_plane(xs + span * u, yc + A * std::sin(4.0 * kPi * u)));
    }
    return spec;
}

}  // namespace mscr::pathfollow
