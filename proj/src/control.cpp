#include "mscr/control.hpp"

#include "mscr/io.hpp"
#include "mscr/jacobian.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mscr::control {

LesoState leso_step(const LesoState& s, double y, double u, double J, double dt) {
    if (!(dt > 0.0)) throw DomainError("observer step needs dt > 0");
    const double e = y - s.x1;
    LesoState n = s;
    n.x1 = s.x1 + dt * (s.x2 + s.beta1 / s.eps * e + J * u);
    n.x2 = s.x2 + dt * (s.beta2 / (s.eps * s.eps) * e);
    return n;
}

Eigen::Matrix2d leso_error_transition(const LesoState& s, double dt) {
    Eigen::Matrix2d A;
    A << 1.0 - dt * s.beta1 / s.eps, dt,
         -dt * s.beta2 / (s.eps * s.eps), 1.0;
    return A;
}

double spectral_radius(const Eigen::Matrix2d& A) {
    return A.eigenvalues().cwiseAbs().maxCoeff();
}

TdState td_step(const TdState& s, double y_r, double dt) {
    if (!(dt > 0.0)) throw DomainError("differentiator step needs dt > 0");
    const double R = s.speed;
    double ddy = -s.k1 * R * R * (s.y - y_r) - s.k2 * R * s.dy;
    TdState n = s;
    n.y = s.y + dt * s.dy;
    n.dy = s.dy + dt * ddy;
    return n;
}

double control_pd(const TdState& td, double x1, double k) { return td.dy + k * (td.y - x1); }

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::Pd: return "pd";
    case Variant::Qsc: return "qsc";
    case Variant::DampedQsc: return "damped-qsc";
    }
    return "?";
}

Variant parse_variant(const std::string& s) {
    if (s == "pd") return Variant::Pd;
    if (s == "qsc") return Variant::Qsc;
    if (s == "damped-qsc" || s == "damped_qsc") return Variant::DampedQsc;
    throw ConfigError("unknown controller variant '" + s + "' (pd | qsc | damped-qsc)");
}

double control_qsc(double u0, double x2, double J, Variant variant, double lambda,
                   DampingForm form) {
    switch (variant) {
    case Variant::Pd:
        return u0;
    case Variant::Qsc:
        if (J == 0.0)
            throw SingularityError("quasi-static law at J_psi = 0; use the damped variant");
        return (u0 - x2) / J;
    case Variant::DampedQsc:
        if (form == DampingForm::Piecewise)
            return (u0 - x2) / jacobian::damped_jacobian(J, lambda);
        return (u0 - x2) * jacobian::damped_inverse(J, lambda);
    }
    return 0.0;
}

double Reference::value(double t) const {
    if (kind == Kind::Step) return t >= start ? offset + amplitude : offset;
    return offset + amplitude * std::cos(2.0 * kPi * t / period + phase);
}

JacobianTable::JacobianTable(const RobotParams& params, const Actuation& act,
                             const PlaneConfig& plane, double psi_lo, double psi_hi, int points,
                             const elastica::SolverOptions& opts) {
    if (points < 2 || !(psi_hi > psi_lo)) throw DomainError("Jacobian table needs a valid range");
    elastica::SolverOptions o = opts;
    for (int i = 0; i < points; ++i) {
        Actuation a = act;
        a.psi = psi_lo + (psi_hi - psi_lo) * i / (points - 1);
        double slope = 0.0;
        psi_.push_back(a.psi);
        J_.push_back(jacobian::tip_jacobian(params, a, plane, o, nullptr, &slope));
        o.initial_slope = slope;
    }
}

double JacobianTable::operator()(double psi) const {
    if (psi_.empty()) throw DomainError("empty Jacobian table");
    if (psi <= psi_.front()) return J_.front();
    if (psi >= psi_.back()) return J_.back();
    auto it = std::upper_bound(psi_.begin(), psi_.end(), psi);
    std::size_t i = it - psi_.begin() - 1;
    double w = (psi - psi_[i]) / (psi_[i + 1] - psi_[i]);
    return (1 - w) * J_[i] + w * J_[i + 1];
}

namespace {

/// Additive output disturbance, stateful for the filtered-noise kind.
class DisturbanceSource {
public:
    DisturbanceSource(const Disturbance& d, double dt, std::uint64_t seed)
        : d_(d), dt_(dt), rng_(seed) {}

    double output(double t) {
        switch (d_.kind) {
        case Disturbance::Kind::None: return 0.0;
        case Disturbance::Kind::Step: return t >= d_.start ? d_.magnitude : 0.0;
        case Disturbance::Kind::Ramp: return t >= d_.start ? d_.magnitude * (t - d_.start) : 0.0;
        case Disturbance::Kind::Noise: {
            // First-order low-pass of white noise scaled to unit stationary variance.
            double a = std::exp(-2.0 * kPi * d_.bandwidth * dt_);
            state_ = a * state_ + std::sqrt(1.0 - a * a) * gauss_(rng_);
            return t >= d_.start ? d_.magnitude * state_ : 0.0;
        }
        }
        return 0.0;
    }

    double measurement() {
        return d_.measurement_noise > 0.0 ? d_.measurement_noise * gauss_(rng_) : 0.0;
    }

private:
    Disturbance d_;
    double dt_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    double state_ = 0.0;
};

}  // namespace

SimTrace simulate_closed_loop(const RobotParams& params, const Actuation& act0,
                              const PlaneConfig& plane, const ControllerConfig& cfg,
                              const Reference& ref_in, const Disturbance& dist,
                              const SimOptions& opts) {
    if (!(opts.dt > 0.0 && opts.dt <= 0.02)) throw DomainError("simulation needs 0 < dt <= 0.02 s");
    if (!(opts.duration > 0.0)) throw DomainError("simulation duration must be positive");
    if (!(cfg.psi_min < cfg.psi_max)) throw DomainError("joint limits need psi_min < psi_max");
    if (!(cfg.gain > 0.0)) throw DomainError("controller gain must be positive");
    auto feas = elastica::feasibility_check(params, act0, plane);
    if (!feas.feasible())
        throw DomainError("initial configuration fails the feasibility check (min distance " +
                          std::to_string(feas.min_distance) + " m, bound " +
                          std::to_string(feas.threshold) + " m)");

    SimTrace trace;
    trace.dt = opts.dt;
    Reference ref = ref_in;
    if (ref.unreachable) {
        auto sw = elastica::workspace_sweep(params, act0.magnet_position, act0.moment,
                                            elastica::periodic_grid(defaults::kSweepPoints), plane,
                                            opts.solver);
        trace.workspace_min = sw.theta_min;
        trace.workspace_max = sw.theta_max;
        ref.offset += ref.amplitude >= 0.0 ? sw.theta_max : sw.theta_min;
        ref.unreachable = false;
    }

    JacobianTable table;
    if (!cfg.exact_jacobian && cfg.variant != Variant::Pd)
        table = JacobianTable(params, act0, plane, cfg.psi_min - 0.1, cfg.psi_max + 0.1,
                              cfg.table_points, opts.solver);

    Actuation act = act0;
    act.psi = std::clamp(act0.psi, cfg.psi_min, cfg.psi_max);
    elastica::SolverOptions so = opts.solver;
    elastica::Shape shape = elastica::solve_bvp(params, act, plane, so);

    DisturbanceSource source(dist, opts.dt, opts.seed);
    const long steps = std::lround(opts.duration / opts.dt);
    double d = source.output(0.0);
    double y_true = shape.tip_angle() + d;

    LesoState leso = cfg.leso;
    leso.x1 = y_true;
    leso.x2 = 0.0;
    TdState td = cfg.td;
    td.y = opts.td_initial.value_or(y_true);
    td.dy = 0.0;

    for (long n = 0; n <= steps; ++n) {
        const double t = n * opts.dt;
        const double y_meas = (opts.sensor ? opts.sensor(shape) + d : y_true) + source.measurement();
        const double y_r = ref.value(t);

        double J = 0.0;
        if (cfg.variant != Variant::Pd)
            J = cfg.exact_jacobian ? jacobian::analytic_jacobian(shape, act, params, plane).tip
                                   : table(act.psi);

        double u0 = control_pd(td, leso.x1, cfg.gain);
        double u;
        try {
            u = control_qsc(u0, leso.x2, J, cfg.variant, cfg.lambda, cfg.damping);
        } catch (const SingularityError& e) {
            trace.aborted = true;
            trace.abort_reason = e.what();
            break;
        }
        if (cfg.rate_limit) u = std::clamp(u, -*cfg.rate_limit, *cfg.rate_limit);

        double psi_next = act.psi + u * opts.dt;
        if (psi_next <= cfg.psi_min || psi_next >= cfg.psi_max) {
            trace.limit_hit = true;
            psi_next = std::clamp(psi_next, cfg.psi_min, cfg.psi_max);
        }
        const double u_applied = (psi_next - act.psi) / opts.dt;

        trace.rows.push_back({t, y_r, td.y, y_true, leso.x1, leso.x2, u_applied, act.psi});
        if (n == steps) break;

        leso = leso_step(leso, y_meas, u_applied, J, opts.dt);
        td = td_step(td, y_r, opts.dt);

        act.psi = psi_next;
        so.initial_slope = shape.initial_slope();
        try {
            shape = elastica::solve_bvp(params, act, plane, so);
        } catch (const Error& e) {
            trace.aborted = true;
            trace.abort_reason = e.what();
            break;
        }
        d = source.output(t + opts.dt);
        y_true = shape.tip_angle() + d;
    }
    return trace;
}

Metrics trace_metrics(const SimTrace& trace) {
    if (trace.rows.empty()) throw DomainError("empty trace");
    Metrics m;
    const auto& r = trace.rows;
    double lo = r.front().theta, hi = r.front().theta;
    for (const auto& row : r) {
        lo = std::min(lo, row.y_r);
        hi = std::max(hi, row.y_r);
    }
    // The reference envelope includes the starting output, so a step's overshoot is
    // the excursion past its target relative to the step size.
    const double width = hi - lo;
    double excess = 0.0;
    for (const auto& row : r) excess = std::max({excess, row.theta - hi, lo - row.theta});
    m.overshoot_pct = width > 0.0 ? 100.0 * excess / width : 0.0;

    double se = 0.0;
    for (const auto& row : r) se += (row.y_r - row.theta) * (row.y_r - row.theta);
    m.rmse = std::sqrt(se / r.size());

    std::size_t start = r.size() - std::max<std::size_t>(1, r.size() / 5);
    double acc = 0.0;
    for (std::size_t i = start; i < r.size(); ++i) acc += std::abs(r[i].y_r - r[i].theta);
    m.steady_state_error = acc / (r.size() - start);

    for (std::size_t i = 0; i + 1 < r.size(); ++i)
        m.control_energy += r[i].u * r[i].u * (r[i + 1].t - r[i].t);
    return m;
}

int sign_flips(const SimTrace& trace, double t0, double t1, double deadband) {
    int flips = 0, last = 0;
    for (const auto& row : trace.rows) {
        if (row.t < t0 || row.t > t1) continue;
        if (std::abs(row.u) <= deadband) continue;
        int s = row.u > 0 ? 1 : -1;
        if (last != 0 && s != last) ++flips;
        last = s;
    }
    return flips;
}

void write_trace(const std::filesystem::path& path, const SimTrace& trace) {
    io::CsvWriter w(path, "t,y_r,y_r_tracked,theta_L,x1_hat,x2_hat,u,psi");
    for (const auto& r : trace.rows) w.row({r.t, r.y_r, r.y_r_tracked, r.theta, r.x1, r.x2, r.u, r.psi});
}

}  // namespace mscr::control
