#include "mscr/elastica.hpp"

#include "mscr/magnetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mscr::elastica {

using magnetics::dipole_field;
using magnetics::dipole_gradient;

void RobotParams::validate() const {
    if (!(length > 0.0) || !(radius > 0.0) || !(youngs_modulus > 0.0) || !(magnetization >= 0.0))
        throw ConfigError("robot parameters must be positive (L, r, E > 0, M >= 0)");
}

RobotParams RobotParams::mscr1() { return {0.024, 0.54e-3, 3.0e6, 8.0e3}; }
RobotParams RobotParams::mscr2() { return {0.030, 0.65e-3, 2.8e6, 9.3e3}; }

Vec3 PlaneConfig::axis_o() const { return {0.0, std::cos(phi), std::sin(phi)}; }
Vec3 PlaneConfig::normal() const { return {0.0, std::sin(phi), -std::cos(phi)}; }

Actuation Actuation::above_tip(const RobotParams& params, double height, double psi,
                               double moment, const PlaneConfig& plane) {
    return {plane.in_plane(params.length, height), psi, moment};
}

// ---------------------------------------------------------------------------
// Shape helpers

Shape Shape::from_angles(double length, std::vector<double> theta) {
    if (theta.size() < 3) throw DomainError("shape needs at least two intervals");
    Shape s;
    s.length = length;
    s.theta = std::move(theta);
    const int n = s.intervals();
    const double h = length / n;
    s.dtheta.resize(n + 1);
    s.xc.assign(n + 1, 0.0);
    s.ys.assign(n + 1, 0.0);
    for (int i = 1; i < n; ++i) s.dtheta[i] = (s.theta[i + 1] - s.theta[i - 1]) / (2 * h);
    s.dtheta[0] = (-3 * s.theta[0] + 4 * s.theta[1] - s.theta[2]) / (2 * h);
    s.dtheta[n] = (3 * s.theta[n] - 4 * s.theta[n - 1] + s.theta[n - 2]) / (2 * h);
    for (int i = 0; i < n; ++i) {
        s.xc[i + 1] = s.xc[i] + 0.5 * h * (std::cos(s.theta[i]) + std::cos(s.theta[i + 1]));
        s.ys[i + 1] = s.ys[i] + 0.5 * h * (std::sin(s.theta[i]) + std::sin(s.theta[i + 1]));
    }
    s.residual = s.dtheta[n];
    return s;
}

Shape Shape::straight(double length, int intervals) {
    return from_angles(length, std::vector<double>(intervals + 1, 0.0));
}

namespace {

void check_arc(const Shape& shape, double s) {
    if (!(s >= 0.0 && s <= shape.length * (1 + 1e-12)))
        throw DomainError("arc length " + std::to_string(s) + " outside [0, L]");
}

// Locate s in the grid: cell index and local offset.
std::pair<int, double> locate(const Shape& shape, double s) {
    const double h = shape.step();
    int i = std::clamp(static_cast<int>(s / h), 0, shape.intervals() - 1);
    return {i, s - i * h};
}

// Cubic Hermite interpolation of the angle using the stored slopes.
double angle_at(const Shape& shape, int i, double t) {
    const double h = shape.step();
    double u = t / h;
    double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
    double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
    return h00 * shape.theta[i] + h10 * h * shape.dtheta[i] + h01 * shape.theta[i + 1] +
           h11 * h * shape.dtheta[i + 1];
}

// Trapezoidal integrals from 0 to s.
std::pair<double, double> integrals(const Shape& shape, double s) {
    auto [i, t] = locate(shape, s);
    double th = angle_at(shape, i, t);
    double X = shape.xc[i] + 0.5 * t * (std::cos(shape.theta[i]) + std::cos(th));
    double Y = shape.ys[i] + 0.5 * t * (std::sin(shape.theta[i]) + std::sin(th));
    return {X, Y};
}

}  // namespace

Vec3 body_point(const Shape& shape, double s, const PlaneConfig& plane) {
    check_arc(shape, s);
    auto [X, Y] = integrals(shape, s);
    return plane.in_plane(X, Y);
}

Vec3 dx_dtheta(const Shape& shape, double s, const PlaneConfig& plane) {
    check_arc(shape, s);
    auto [X, Y] = integrals(shape, s);
    return plane.in_plane(-Y, X);
}

// ---------------------------------------------------------------------------
// Load term

namespace {

/** @brief Frozen inputs of sigma for one actuation. */
struct Load {
    double factor;  // A / EI
    double M;
    Vec3 m_hat;
    Vec3 magnet;
    double moment;
    Vec3 o;

    Load(const Actuation& act, const RobotParams& params, const PlaneConfig& plane)
        : factor(params.load_factor()),
          M(params.magnetization),
          m_hat(magnetics::unit_moment_in_plane(act.psi, plane.phi)),
          magnet(act.magnet_position),
          moment(act.moment),
          o(plane.axis_o()) {}

    double operator()(double th, double X, double Y) const {
        if (moment == 0.0 || M == 0.0) return 0.0;
        const double c = std::cos(th), s = std::sin(th);
        Vec3 x(X, o.y() * Y, o.z() * Y);
        Vec3 Rm(M * c, M * s * o.y(), M * s * o.z());
        Vec3 dRm(-M * s, M * c * o.y(), M * c * o.z());
        Vec3 xth(-Y, X * o.y(), X * o.z());
        Vec3 p = x - magnet;
        Vec3 b = dipole_field(p, m_hat, moment);
        Mat3 G = dipole_gradient(p, m_hat, moment);
        return -factor * (dRm.dot(b) + Rm.dot(G * xth));
    }
};

}  // namespace

double rhs_sigma(const BodyState& st, const Actuation& act, const RobotParams& params,
                 const PlaneConfig& plane) {
    return Load(act, params, plane)(st.theta, st.xc, st.ys);
}

double rhs_sigma(const Shape& shape, double s, const Actuation& act, const RobotParams& params,
                 const PlaneConfig& plane) {
    check_arc(shape, s);
    auto [i, t] = locate(shape, s);
    auto [X, Y] = integrals(shape, s);
    return rhs_sigma({angle_at(shape, i, t), X, Y}, act, params, plane);
}

Vec3 sigma_row(const BodyState& st, const Actuation& act, const RobotParams& params,
               const PlaneConfig& plane) {
    if (act.moment == 0.0 || params.magnetization == 0.0) return Vec3::Zero();
    const double M = params.magnetization;
    Vec3 x = plane.in_plane(st.xc, st.ys);
    Vec3 Rm = M * plane.in_plane(std::cos(st.theta), std::sin(st.theta));
    Vec3 dRm = M * plane.in_plane(-std::sin(st.theta), std::cos(st.theta));
    Vec3 xth = plane.in_plane(-st.ys, st.xc);
    Vec3 p = x - act.magnet_position;
    Mat3 B = magnetics::field_operator(p, act.moment);
    Mat3 Bg = magnetics::gradient_operator(p, Rm, act.moment);
    return -params.load_factor() * (B.transpose() * dRm + Bg.transpose() * xth);
}

// ---------------------------------------------------------------------------
// Shooting solver

namespace {

struct State {
    double th, dth, X, Y;
};

inline State axpy(const State& y, double a, const State& k) {
    return {y.th + a * k.th, y.dth + a * k.dth, y.X + a * k.X, y.Y + a * k.Y};
}

inline State deriv(const Load& load, const State& y) {
    return {y.dth, load(y.th, y.X, y.Y), std::cos(y.th), std::sin(y.th)};
}

inline State rk4(const Load& load, const State& y, double h) {
    State k1 = deriv(load, y);
    State k2 = deriv(load, axpy(y, h / 2, k1));
    State k3 = deriv(load, axpy(y, h / 2, k2));
    State k4 = deriv(load, axpy(y, h, k3));
    return {y.th + h / 6 * (k1.th + 2 * k2.th + 2 * k3.th + k4.th),
            y.dth + h / 6 * (k1.dth + 2 * k2.dth + 2 * k3.dth + k4.dth),
            y.X + h / 6 * (k1.X + 2 * k2.X + 2 * k3.X + k4.X),
            y.Y + h / 6 * (k1.Y + 2 * k2.Y + 2 * k3.Y + k4.Y)};
}

}  // namespace

Shape solve_bvp(const RobotParams& params, const Actuation& act, const PlaneConfig& plane,
                const SolverOptions& opts) {
    params.validate();
    if (opts.intervals < 2) throw DomainError("shape grid needs at least two intervals");
    if (!(opts.tolerance > 0.0) || opts.max_iterations < 1)
        throw DomainError("shooting tolerance and iteration budget must be positive");

    const int n = opts.intervals;
    const double L = params.length;
    const double h = L / n;

    // Assumption 1 pre-pass on the undeformed rod, inflated by one cell.
    for (int i = 0; i <= n; ++i) {
        double d = (plane.in_plane(h * i, 0.0) - act.magnet_position).norm();
        if (d <= h)
            throw DomainError("magnet within one grid cell of the rod at s = " +
                              std::to_string(h * i));
    }

    const Load load(act, params, plane);
    Shape shape;
    shape.length = L;
    shape.theta.resize(n + 1);
    shape.dtheta.resize(n + 1);
    shape.xc.resize(n + 1);
    shape.ys.resize(n + 1);

    // One pass integrates the trial and a nudged copy; returns residual and slope.
    auto shoot = [&](double k) {
        const double delta = 1e-6 * std::max(1.0, std::abs(k));
        State y{0.0, k, 0.0, 0.0};
        State z{0.0, k + delta, 0.0, 0.0};
        for (int i = 0; i <= n; ++i) {
            shape.theta[i] = y.th;
            shape.dtheta[i] = y.dth;
            shape.xc[i] = y.X;
            shape.ys[i] = y.Y;
            if (i == n) break;
            y = rk4(load, y, h);
            z = rk4(load, z, h);
        }
        return std::pair{y.dth, (z.dth - y.dth) / delta};
    };

    double k = opts.initial_slope.value_or(0.0);
    double k_lo = 0, k_hi = 0;
    bool has_lo = false, has_hi = false;
    double F = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= opts.max_iterations; ++it) {
        auto [f, d] = shoot(k);
        F = f;
        if (!std::isfinite(F)) throw SolverError("shooting residual is not finite", F, it);
        if (std::abs(F) < opts.tolerance) {
            shape.iterations = it;
            shape.residual = F;
            shape.slope_derivative = d;
            return shape;
        }
        if (F < 0) {
            k_lo = k;
            has_lo = true;
        } else {
            k_hi = k;
            has_hi = true;
        }
        double next = (std::isfinite(d) && d != 0.0) ? k - F / d : k - F;
        if (has_lo && has_hi) {
            double a = std::min(k_lo, k_hi), b = std::max(k_lo, k_hi);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
        }
        k = next;
    }
    throw SolverError("shooting did not converge in " + std::to_string(opts.max_iterations) +
                          " iterations (residual " + std::to_string(F) + ")",
                      F, opts.max_iterations);
}

double tip_angle(const RobotParams& params, const Actuation& act, const PlaneConfig& plane,
                 const SolverOptions& opts) {
    return solve_bvp(params, act, plane, opts).tip_angle();
}

// ---------------------------------------------------------------------------
// Feasibility

double distance_threshold(const RobotParams& params, double moment) {
    const double num = kMu0 * moment * params.magnetization * params.area() * params.length *
                       params.length;
    return std::cbrt(num / (kPi * params.bending_stiffness()));
}

FeasibilityReport feasibility_check(const RobotParams& params, const Actuation& act,
                                    const PlaneConfig& plane, const Shape* shape, int intervals) {
    Shape straight;
    if (!shape) {
        straight = Shape::straight(params.length, intervals);
        shape = &straight;
    }
    FeasibilityReport rep;
    rep.cell = shape->step();
    rep.min_distance = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= shape->intervals(); ++i) {
        Vec3 x = plane.in_plane(shape->xc[i], shape->ys[i]);
        rep.min_distance = std::min(rep.min_distance, (x - act.magnet_position).norm());
    }
    rep.threshold = distance_threshold(params, act.moment);
    rep.clearance_ok = rep.min_distance > rep.cell;
    rep.threshold_ok = rep.min_distance > rep.threshold;
    rep.slender = params.slender();
    rep.in_plane = std::abs(act.magnet_position.dot(plane.normal())) < 1e-9;
    return rep;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<double> periodic_grid(int n, double lo) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + 2.0 * kPi * i / n;
    return g;
}

namespace {

// Golden-section search for the extremum of the tip angle on [a, b].
SweepPoint refine_extremum(const RobotParams& params, const Vec3& pos, double moment,
                           const PlaneConfig& plane, SolverOptions opts, double a, double b,
                           double warm, bool maximize) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    opts.initial_slope = warm;
    auto eval = [&](double psi) {
        Shape s = solve_bvp(params, {pos, psi, moment}, plane, opts);
        return maximize ? s.tip_angle() : -s.tip_angle();
    };
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = eval(c), fd = eval(d);
    while (b - a > 1e-7) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    double psi = 0.5 * (a + b);
    Shape s = solve_bvp(params, {pos, psi, moment}, plane, opts);
    return {psi, s.tip_angle(), s.iterations, s.initial_slope()};
}

}  // namespace

SweepResult workspace_sweep(const RobotParams& params, const Vec3& magnet_position, double moment,
                            std::span<const double> psi_grid, const PlaneConfig& plane,
                            const SolverOptions& opts) {
    if (psi_grid.size() < 3) throw DomainError("psi grid needs at least three points");
    for (std::size_t i = 1; i < psi_grid.size(); ++i)
        if (!(psi_grid[i] > psi_grid[i - 1])) throw DomainError("psi grid must be increasing");
    const double spacing = (psi_grid.back() - psi_grid.front()) / (psi_grid.size() - 1);
    if (psi_grid.back() - psi_grid.front() + spacing < 2.0 * kPi - 1e-9)
        throw DomainError("psi grid must cover one full period");

    SweepResult res;
    std::vector<double> slopes;
    long total_iterations = 0;
    for (std::size_t i = 0; i < psi_grid.size(); ++i) {
        SolverOptions o = opts;
        // Polynomial extrapolation of the converged initial slopes along the sweep.
        std::size_t m = slopes.size();
        if (m >= 3 && psi_grid.size() > 3) {
            o.initial_slope = 3 * slopes[m - 1] - 3 * slopes[m - 2] + slopes[m - 3];
        } else if (m == 2) {
            o.initial_slope = 2 * slopes[1] - slopes[0];
        } else if (m == 1) {
            o.initial_slope = slopes[0];
        }
        Shape s;
        try {
            s = solve_bvp(params, {magnet_position, psi_grid[i], moment}, plane, o);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " at psi = " + std::to_string(psi_grid[i]),
                              e.residual(), e.iterations());
        }
        slopes.push_back(s.initial_slope());
        total_iterations += s.iterations;
        res.points.push_back({psi_grid[i], s.tip_angle(), s.iterations, s.initial_slope()});
    }
    res.mean_iterations = static_cast<double>(total_iterations) / psi_grid.size();

    auto cmp = [](const SweepPoint& a, const SweepPoint& b) { return a.theta_tip < b.theta_tip; };
    auto jmax = std::max_element(res.points.begin(), res.points.end(), cmp) - res.points.begin();
    auto jmin = std::min_element(res.points.begin(), res.points.end(), cmp) - res.points.begin();
    auto hi = refine_extremum(params, magnet_position, moment, plane, opts,
                              res.points[jmax].psi - spacing, res.points[jmax].psi + spacing,
                              res.points[jmax].initial_slope, true);
    auto lo = refine_extremum(params, magnet_position, moment, plane, opts,
                              res.points[jmin].psi - spacing, res.points[jmin].psi + spacing,
                              res.points[jmin].initial_slope, false);
    res.psi_max = hi.psi;
    res.theta_max = hi.theta_tip;
    res.psi_min = lo.psi;
    res.theta_min = lo.theta_tip;
    return res;
}

// ---------------------------------------------------------------------------
// Sinusoid decomposition

double SinusoidDecomposition::predict(double psi) const {
    return -along_x * std::cos(psi) + along_o * std::sin(psi);
}

SinusoidDecomposition sinusoid_decomposition(const Shape& shape, const Actuation& act,
                                             const RobotParams& params, const PlaneConfig& plane) {
    // theta(0) = 0 and theta'(L) = 0 give theta_L = -int_0^L s sigma(s) ds.
    const int n = shape.intervals();
    const double h = shape.step();
    Vec3 acc = Vec3::Zero();
    const bool simpson = n % 2 == 0;
    for (int i = 0; i <= n; ++i) {
        double w = simpson ? ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) / 3.0
                           : ((i == 0 || i == n) ? 0.5 : 1.0);
        Vec3 row = sigma_row({shape.theta[i], shape.xc[i], shape.ys[i]}, act, params, plane);
        acc += w * h * shape.arc(i) * row;
    }
    SinusoidDecomposition dec;
    dec.row = -acc;
    double r1 = dec.along_x = dec.row.x();
    double r2 = dec.along_o = dec.row.dot(plane.axis_o());
    double rho = std::hypot(r1, r2);
    dec.amplitude = (r2 >= 0.0 ? 1.0 : -1.0) * rho;
    dec.phase = r2 != 0.0 ? std::atan(r1 / r2) : (r1 >= 0 ? kPi / 2 : -kPi / 2);
    return dec;
}

}  // namespace mscr::elastica
