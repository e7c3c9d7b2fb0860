#include "mscr/jacobian.hpp"

#include "mscr/kernels.hpp"
#include "mscr/magnetics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mscr::jacobian {

namespace {

/// Body states at nodes followed by cell midpoints (Hermite interpolation, 4th order).
struct BodySamples {
    std::vector<double> theta, X, Y;
    std::vector<double> px, py, pz;  // relative to the magnet
};

BodySamples sample_body(const Shape& shape, const Actuation& act, const PlaneConfig& plane) {
    const int n = shape.intervals();
    const double h = shape.step();
    BodySamples b;
    b.theta.reserve(2 * n + 1);
    for (int i = 0; i <= n; ++i) {
        b.theta.push_back(shape.theta[i]);
        b.X.push_back(shape.xc[i]);
        b.Y.push_back(shape.ys[i]);
    }
    for (int i = 0; i < n; ++i) {
        double t0 = shape.theta[i], t1 = shape.theta[i + 1];
        b.theta.push_back(0.5 * (t0 + t1) + h / 8 * (shape.dtheta[i] - shape.dtheta[i + 1]));
        b.X.push_back(0.5 * (shape.xc[i] + shape.xc[i + 1]) + h / 8 * (std::cos(t0) - std::cos(t1)));
        b.Y.push_back(0.5 * (shape.ys[i] + shape.ys[i + 1]) + h / 8 * (std::sin(t0) - std::sin(t1)));
    }
    for (std::size_t j = 0; j < b.theta.size(); ++j) {
        Vec3 p = plane.in_plane(b.X[j], b.Y[j]) - act.magnet_position;
        b.px.push_back(p.x());
        b.py.push_back(p.y());
        b.pz.push_back(p.z());
    }
    return b;
}

}  // namespace

SlCoefficients sl_coefficients(const Shape& shape, const Actuation& act,
                               const RobotParams& params, const PlaneConfig& plane) {
    const int n = shape.intervals();
    SlCoefficients c;
    c.q.assign(n + 1, 0.0);
    c.r.assign(n + 1, 0.0);
    c.q_mid.assign(n, 0.0);
    c.r_mid.assign(n, 0.0);
    if (act.moment == 0.0 || params.magnetization == 0.0) return c;

    BodySamples b = sample_body(shape, act, plane);
    const std::size_t m = b.theta.size();
    kernels::FieldBatch f, fd;
    kernels::dipole_batch(b.px.data(), b.py.data(), b.pz.data(), m,
                          magnetics::unit_moment_in_plane(act.psi, plane.phi), act.moment, f);
    kernels::dipole_batch(b.px.data(), b.py.data(), b.pz.data(), m,
                          magnetics::unit_moment_in_plane_dpsi(act.psi, plane.phi), act.moment, fd);

    const double M = params.magnetization;
    const double k = params.load_factor();
    for (std::size_t j = 0; j < m; ++j) {
        const double th = b.theta[j];
        Vec3 Rm = M * plane.in_plane(std::cos(th), std::sin(th));
        Vec3 dRm = M * plane.in_plane(-std::sin(th), std::cos(th));
        Vec3 x = plane.in_plane(b.X[j], b.Y[j]);
        Vec3 xth = plane.in_plane(-b.Y[j], b.X[j]);
        Vec3 bf = f.field(j);
        Mat3 G = f.gradient(j);
        double q = k * (Rm.dot(bf) + Rm.dot(G * x) - 2.0 * dRm.dot(G * xth));
        double r = -k * (dRm.dot(fd.field(j)) + Rm.dot(fd.gradient(j) * xth));
        if (j <= static_cast<std::size_t>(n)) {
            c.q[j] = q;
            c.r[j] = r;
        } else {
            c.q_mid[j - n - 1] = q;
            c.r_mid[j - n - 1] = r;
        }
    }
    return c;
}

bool in_admissible_set(double K, double length, int* branch) {
    if (branch) *branch = -1;
    if (!(K >= 0.0)) return false;
    const double base = kPi / (2.0 * length);
    if (K <= base * base) {
        if (branch) *branch = 0;
        return true;
    }
    // sqrt(K) / base in [4k-1, 4k+1]
    double w = std::sqrt(K) / base;
    int k = static_cast<int>(std::lround(w / 4.0));
    if (k >= 1 && w >= 4.0 * k - 1.0 && w <= 4.0 * k + 1.0) {
        if (branch) *branch = k;
        return true;
    }
    return false;
}

LipschitzReport lipschitz_K(const RobotParams& params, const Actuation& act, const Shape& shape,
                            const PlaneConfig& plane) {
    LipschitzReport rep;
    if (act.moment != 0.0 && params.magnetization != 0.0) {
        const int n = shape.intervals();
        std::vector<double> px(n + 1), py(n + 1), pz(n + 1);
        for (int i = 0; i <= n; ++i) {
            Vec3 p = plane.in_plane(shape.xc[i], shape.ys[i]) - act.magnet_position;
            px[i] = p.x();
            py[i] = p.y();
            pz[i] = p.z();
        }
        kernels::FieldBatch f;
        kernels::dipole_batch(px.data(), py.data(), pz.data(), n + 1,
                              magnetics::unit_moment_in_plane(act.psi, plane.phi), act.moment, f);
        for (int i = 0; i <= n; ++i) {
            rep.field_max = std::max(rep.field_max, f.field(i).norm());
            rep.gradient_max = std::max(rep.gradient_max, f.gradient(i).norm());
        }
    }
    const double MA = params.magnetization * params.area();
    rep.K = MA / params.bending_stiffness() *
            (rep.field_max + 3.0 * rep.gradient_max * params.length + rep.hessian_term);
    rep.admissible = in_admissible_set(rep.K, params.length, &rep.branch);
    return rep;
}

const char* method_name(Method m) {
    switch (m) {
    case Method::Analytical: return "analytical";
    case Method::FallbackJ1: return "fallback-J1";
    case Method::Numeric: return "numeric";
    }
    return "?";
}

JacobianProfile analytic_jacobian(const Shape& shape, const Actuation& act,
                                  const RobotParams& params, const PlaneConfig& plane) {
    const int n = shape.intervals();
    const double h = shape.step();
    SlCoefficients c = sl_coefficients(shape, act, params, plane);

    // J'' = q J + r (forced, zero start) and J'' = q J (unit initial slope).
    std::vector<double> J1(n + 1), dJ1(n + 1), J2(n + 1), dJ2(n + 1);
    auto integrate = [&](bool forced, double slope0, std::vector<double>& J, std::vector<double>& dJ) {
        double y = 0.0, z = slope0;
        J[0] = y;
        dJ[0] = z;
        for (int i = 0; i < n; ++i) {
            const double r0 = forced ? c.r[i] : 0.0, rm = forced ? c.r_mid[i] : 0.0,
                         r1 = forced ? c.r[i + 1] : 0.0;
            double k1y = z, k1z = c.q[i] * y + r0;
            double k2y = z + h / 2 * k1z, k2z = c.q_mid[i] * (y + h / 2 * k1y) + rm;
            double k3y = z + h / 2 * k2z, k3z = c.q_mid[i] * (y + h / 2 * k2y) + rm;
            double k4y = z + h * k3z, k4z = c.q[i + 1] * (y + h * k3y) + r1;
            y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
            z += h / 6 * (k1z + 2 * k2z + 2 * k3z + k4z);
            J[i + 1] = y;
            dJ[i + 1] = z;
        }
    };
    integrate(true, 0.0, J1, dJ1);
    integrate(false, 1.0, J2, dJ2);

    JacobianProfile prof;
    prof.length = shape.length;
    prof.lipschitz = lipschitz_K(params, act, shape, plane);
    const double d2 = dJ2[n];
    if (prof.lipschitz.branch == 0 && prof.lipschitz.K < std::pow(kPi / (2 * shape.length), 2) &&
        !(d2 > 0.0)) {
        throw Error("homogeneous sensitivity slope J2'(L) = " + std::to_string(d2) +
                    " is not positive although K = " + std::to_string(prof.lipschitz.K) +
                    " lies below (pi/2L)^2");
    }
    if (prof.lipschitz.admissible) {
        if (d2 == 0.0)
            throw Error("J2'(L) = 0 with admissible K = " + std::to_string(prof.lipschitz.K));
        prof.v = -dJ1[n] / d2;
        prof.method = Method::Analytical;
        prof.J.resize(n + 1);
        prof.dJ.resize(n + 1);
        for (int i = 0; i <= n; ++i) {
            prof.J[i] = J1[i] + prof.v * J2[i];
            prof.dJ[i] = dJ1[i] + prof.v * dJ2[i];
        }
    } else {
        prof.method = Method::FallbackJ1;
        prof.J = std::move(J1);
        prof.dJ = std::move(dJ1);
    }
    prof.tip = prof.J.back();
    return prof;
}

double numeric_jacobian(const RobotParams& params, const Actuation& act, const PlaneConfig& plane,
                        double delta, const SolverOptions& opts, const Shape* warm) {
    if (!(delta > 0.0)) throw DomainError("finite-difference step must be positive");
    SolverOptions o = opts;
    if (warm) o.initial_slope = warm->initial_slope();
    Actuation a = act, b = act;
    a.psi += delta;
    b.psi -= delta;
    double fa = elastica::tip_angle(params, a, plane, o);
    double fb = elastica::tip_angle(params, b, plane, o);
    return (fa - fb) / (2.0 * delta);
}

Eigen::RowVector3d position_jacobian(const RobotParams& params, const Actuation& act,
                                     const PlaneConfig& plane, double delta,
                                     const SolverOptions& opts) {
    if (!(delta > 0.0)) throw DomainError("finite-difference step must be positive");
    Eigen::RowVector3d row;
    SolverOptions o = opts;
    o.initial_slope = elastica::solve_bvp(params, act, plane, opts).initial_slope();
    for (int k = 0; k < 3; ++k) {
        Actuation a = act, b = act;
        a.magnet_position[k] += delta;
        b.magnet_position[k] -= delta;
        row[k] = (elastica::tip_angle(params, a, plane, o) - elastica::tip_angle(params, b, plane, o)) /
                 (2.0 * delta);
    }
    return row;
}

double tip_jacobian(const RobotParams& params, const Actuation& act, const PlaneConfig& plane,
                    const SolverOptions& opts, double* tip_angle, double* initial_slope) {
    Shape s = elastica::solve_bvp(params, act, plane, opts);
    if (tip_angle) *tip_angle = s.tip_angle();
    if (initial_slope) *initial_slope = s.initial_slope();
    return analytic_jacobian(s, act, params, plane).tip;
}

std::vector<SingularityRow> singularity_table(const RobotParams& params,
                                              const std::vector<double>& heights, double moment,
                                              const PlaneConfig& plane, int grid_points,
                                              const SolverOptions& opts) {
    if (grid_points < 8) throw DomainError("singularity grid needs at least 8 points");
    std::vector<SingularityRow> rows;
    for (double H : heights) {
        const Vec3 pos = plane.in_plane(params.length, H);
        auto grid = elastica::periodic_grid(grid_points);
        std::vector<double> J(grid_points), theta(grid_points), slope(grid_points);
        SolverOptions o = opts;
        for (int i = 0; i < grid_points; ++i) {
            J[i] = tip_jacobian(params, {pos, grid[i], moment}, plane, o, &theta[i], &slope[i]);
            o.initial_slope = slope[i];
        }

        struct Root {
            double psi, theta;
            bool rising;
        };
        std::vector<Root> roots;
        for (int i = 0; i < grid_points; ++i) {
            int j = (i + 1) % grid_points;
            double a = grid[i], b = grid[i] + 2.0 * kPi / grid_points;
            double fa = J[i], fb = J[j];
            if ((fa > 0) == (fb > 0)) continue;
            SolverOptions ob = opts;
            ob.initial_slope = slope[i];
            double th = theta[i];
            while (b - a > 1e-7) {
                double mid = 0.5 * (a + b);
                double fm = tip_jacobian(params, {pos, mid, moment}, plane, ob, &th);
                if ((fm > 0) == (fa > 0)) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push_back({0.5 * (a + b), th, J[i] < 0});
        }
        SingularityRow row{H, 0.0, 0.0};
        bool has_min = false, has_max = false;
        double tmin = 0, tmax = 0;
        for (const auto& r : roots) {
            if (r.rising && (!has_min || r.theta < tmin)) {
                row.psi_min = r.psi;
                tmin = r.theta;
                has_min = true;
            }
            if (!r.rising && (!has_max || r.theta > tmax)) {
                row.psi_max = r.psi;
                tmax = r.theta;
                has_max = true;
            }
        }
        if (!has_min || !has_max)
            throw Error("no Jacobian sign change found at H = " + std::to_string(H));
        rows.push_back(row);
    }
    return rows;
}

double damped_jacobian(double J, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("damping lambda must be positive");
    if (std::abs(J) >= lambda) return J;
    return (J < 0.0 ? -1.0 : 1.0) * lambda;
}

double damped_inverse(double J, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("damping lambda must be positive");
    if (std::abs(J) >= lambda) return 1.0 / J;
    return J / (lambda * lambda);
}

}  // namespace mscr::jacobian
