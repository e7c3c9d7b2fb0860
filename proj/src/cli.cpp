#include "mscr/cli.hpp"

#include "mscr/config.hpp"
#include "mscr/control.hpp"
#include "mscr/io.hpp"
#include "mscr/jacobian.hpp"
#include "mscr/kernels.hpp"
#include "mscr/magnetics.hpp"
#include "mscr/manifest.hpp"
#include "mscr/pathfollow.hpp"
#include "mscr/vision.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef MSCR_VERSION
#define MSCR_VERSION "0.0.0"
#endif

namespace mscr::cli {

namespace fs = std::filesystem;
using config::Json;
using config::Scenario;

namespace {

struct Run {
    Scenario sc;
    fs::path out;
    std::uint64_t seed = 1;
    std::vector<std::string> files;

    fs::path file(const std::string& name) {
        files.push_back(name);
        return out / name;
    }
};

// ---------------------------------------------------------------------------
// Scenario readers

elastica::RobotParams robot_params(const Run& run) {
    const Json& s = run.sc.section("robot");
    std::string preset = config::string(s, "preset", "mscr1");
    elastica::RobotParams p;
    if (preset == "mscr1") {
        p = elastica::RobotParams::mscr1();
    } else if (preset == "mscr2") {
        p = elastica::RobotParams::mscr2();
    } else if (preset.size() > 5 && preset.ends_with(".json")) {
        auto path = run.sc.resolve(preset);
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read robot preset " + path.string());
        Json doc;
        try {
            doc = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        Json wrapped = {{"robot", doc}};
        config::validate(wrapped);
        for (const char* k : {"L", "r", "E", "M"})
            if (!doc.contains(k)) throw ConfigError(path.string() + ": missing key '" + k + "'");
        p = {doc["L"].get<double>(), doc["r"].get<double>(), doc["E"].get<double>(), doc["M"].get<double>()};
    } else {
        throw ConfigError("robot.preset must be mscr1, mscr2 or a .json parameter file");
    }
    p.length = config::number(s, "L", p.length);
    p.radius = config::number(s, "r", p.radius);
    p.youngs_modulus = config::number(s, "E", p.youngs_modulus);
    p.magnetization = config::number(s, "M", p.magnetization);
    p.validate();
    return p;
}

elastica::PlaneConfig plane(const Run& run) {
    return {config::number(run.sc.section("magnet"), "phi", 0.0)};
}

elastica::SolverOptions solver(const Run& run) {
    const Json& s = run.sc.section("solver");
    elastica::SolverOptions o;
    o.intervals = config::integer(s, "intervals", defaults::kGridNodes);
    o.tolerance = config::number(s, "tolerance", defaults::kShootingTolerance);
    o.max_iterations = config::integer(s, "max_iterations", defaults::kShootingMaxIterations);
    if (o.intervals < 2) throw ConfigError("solver.intervals must be at least 2");
    if (!(o.tolerance > 0.0)) throw ConfigError("solver.tolerance must be positive");
    if (o.max_iterations < 1) throw ConfigError("solver.max_iterations must be at least 1");
    return o;
}

double moment(const Run& run) {
    double m = config::number(run.sc.section("magnet"), "moment", defaults::kMagnetMoment);
    if (!(m >= 0.0)) throw ConfigError("magnet.moment must be non-negative");
    return m;
}

double height(const Run& run) {
    return config::number(run.sc.section("magnet"), "height", defaults::kMagnetHeight);
}

elastica::Actuation actuation(const Run& run, const elastica::RobotParams& p, double h, double psi) {
    const Json& s = run.sc.section("magnet");
    auto pl = plane(run);
    if (s.contains("position")) {
        auto v = config::numbers(s, "position", {});
        if (v.size() != 3) throw ConfigError("magnet.position needs three components");
        return {Vec3(v[0], v[1], v[2]), psi, moment(run)};
    }
    return elastica::Actuation::above_tip(p, h, psi, moment(run), pl);
}

std::vector<double> psi_grid(const Run& run) {
    const Json& s = run.sc.section("sweep");
    if (s.contains("psi")) {
        auto g = config::numbers(s, "psi", {});
        if (g.size() < 3) throw ConfigError("sweep.psi needs at least three angles");
        return g;
    }
    int n = config::integer(s, "psi_points", defaults::kSweepPoints);
    if (n < 3) throw ConfigError("sweep.psi_points must be at least 3");
    return elastica::periodic_grid(n, config::number(s, "psi_lo", -kPi));
}

std::vector<double> heights(const Run& run, const char* section, std::vector<double> fallback) {
    auto h = config::numbers(run.sc.section(section), "heights", std::move(fallback));
    if (h.empty()) throw ConfigError(std::string(section) + ".heights must not be empty");
    for (double v : h)
        if (!(v > 0.0)) throw ConfigError(std::string(section) + ".heights must be positive");
    return h;
}

control::ControllerConfig controller(const Run& run) {
    const Json& s = run.sc.section("controller");
    control::ControllerConfig c;
    c.variant = control::parse_variant(config::string(s, "variant", "damped-qsc"));
    c.gain = config::number(s, "gain", c.gain);
    c.lambda = config::number(s, "lambda", c.lambda);
    c.psi_min = config::number(s, "psi_min", c.psi_min);
    c.psi_max = config::number(s, "psi_max", c.psi_max);
    if (s.contains("rate_limit")) {
        double r = config::number(s, "rate_limit", 0.0);
        if (!(r > 0.0)) throw ConfigError("controller.rate_limit must be positive");
        c.rate_limit = r;
    }
    std::string damping = config::string(s, "damping", "continuous");
    if (damping == "continuous")
        c.damping = control::DampingForm::Continuous;
    else if (damping == "piecewise")
        c.damping = control::DampingForm::Piecewise;
    else
        throw ConfigError("controller.damping must be continuous or piecewise");
    std::string mode = config::string(s, "mode", "table");
    if (mode != "table" && mode != "exact") throw ConfigError("controller.mode must be table or exact");
    c.exact_jacobian = mode == "exact";
    c.table_points = config::integer(s, "table_points", c.table_points);
    if (c.table_points < 2) throw ConfigError("controller.table_points must be at least 2");
    if (!(c.lambda > 0.0)) throw ConfigError("controller.lambda must be positive");
    if (s.contains("leso")) {
        const Json& l = s["leso"];
        c.leso.beta1 = config::number(l, "beta1", c.leso.beta1);
        c.leso.beta2 = config::number(l, "beta2", c.leso.beta2);
        c.leso.eps = config::number(l, "epsilon", c.leso.eps);
    }
    if (s.contains("td")) {
        const Json& t = s["td"];
        c.td.speed = config::number(t, "speed", c.td.speed);
        c.td.k1 = config::number(t, "k1", c.td.k1);
        c.td.k2 = config::number(t, "k2", c.td.k2);
    }
    return c;
}

control::Reference reference(const Run& run) {
    const Json& s = run.sc.section("reference");
    control::Reference r;
    std::string kind = config::string(s, "kind", "step");
    if (kind == "step")
        r.kind = control::Reference::Kind::Step;
    else if (kind == "cosine")
        r.kind = control::Reference::Kind::Cosine;
    else if (kind == "path")
        throw ConfigError("reference.kind 'path' is run by the follow-path command");
    else
        throw ConfigError("reference.kind must be step or cosine");
    r.amplitude = config::number(s, "amplitude", r.amplitude);
    r.period = config::number(s, "period", r.period);
    r.phase = config::number(s, "phase", r.phase);
    r.offset = config::number(s, "offset", r.offset);
    r.start = config::number(s, "start", r.start);
    r.unreachable = config::boolean(s, "unreachable", false);
    if (r.kind == control::Reference::Kind::Cosine && !(r.period > 0.0))
        throw ConfigError("reference.period must be positive");
    return r;
}

control::Disturbance disturbance(const Run& run) {
    const Json& s = run.sc.section("disturbance");
    control::Disturbance d;
    std::string kind = config::string(s, "kind", "none");
    if (kind == "none")
        d.kind = control::Disturbance::Kind::None;
    else if (kind == "step")
        d.kind = control::Disturbance::Kind::Step;
    else if (kind == "ramp")
        d.kind = control::Disturbance::Kind::Ramp;
    else if (kind == "noise")
        d.kind = control::Disturbance::Kind::Noise;
    else
        throw ConfigError("disturbance.kind must be none, step, ramp or noise");
    d.magnitude = config::number(s, "magnitude", d.magnitude);
    d.start = config::number(s, "start", d.start);
    d.bandwidth = config::number(s, "bandwidth", d.bandwidth);
    d.measurement_noise = config::number(s, "measurement_noise", d.measurement_noise);
    if (!(d.bandwidth > 0.0)) throw ConfigError("disturbance.bandwidth must be positive");
    if (d.measurement_noise < 0.0) throw ConfigError("disturbance.measurement_noise must be non-negative");
    return d;
}

vision::VisionOptions vision_options(const Run& run) {
    const Json& s = run.sc.section("vision");
    vision::VisionOptions o;
    o.threshold = config::number(s, "threshold", o.threshold);
    o.alpha_step = config::number(s, "alpha_step", o.alpha_step);
    o.tip_window = config::number(s, "tip_window", o.tip_window);
    if (!(o.alpha_step > 0.0)) throw ConfigError("vision.alpha_step must be positive");
    if (o.tip_window < 0.0) throw ConfigError("vision.tip_window must be non-negative");
    return o;
}

vision::RasterOptions raster_options(const Run& run) {
    const Json& s = run.sc.section("vision");
    vision::RasterOptions o;
    o.pitch = config::number(s, "pitch", o.pitch);
    o.stroke = config::integer(s, "stroke", o.stroke);
    o.width = config::integer(s, "width", o.width);
    o.height = config::integer(s, "height", o.height);
    if (!(o.pitch > 0.0)) throw ConfigError("vision.pitch must be positive");
    if (o.stroke < 1) throw ConfigError("vision.stroke must be at least 1");
    return o;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_calibrate(Run& run) {
    const Json& s = run.sc.section("calibrate");
    auto range_v = config::numbers(s, "range", {defaults::kWorkingRangeMin, defaults::kWorkingRangeMax});
    if (range_v.size() != 2 || !(range_v[0] > 0.0 && range_v[0] < range_v[1]))
        throw ConfigError("calibrate.range must be [lo, hi] with 0 < lo < hi");
    magnetics::WorkingRange range{range_v[0], range_v[1]};
    std::vector<magnetics::FieldSample> samples;
    if (s.contains("samples")) {
        samples = magnetics::read_samples(run.sc.resolve(config::string(s, "samples", "")));
    } else {
        int count = config::integer(s, "count", 50);
        double noise = config::number(s, "noise", 0.02);
        if (count < 1) throw ConfigError("calibrate.count must be positive");
        if (noise < 0.0) throw ConfigError("calibrate.noise must be non-negative");
        samples = magnetics::synthetic_samples(moment(run), range, count, noise, run.seed);
    }
    auto res = magnetics::calibrate_moment(samples, range);
    magnetics::write_samples(run.file("samples.csv"), samples);
    io::CsvWriter out(run.file("calibration.csv"), "moment_Am2,samples_used,residual_rms_T");
    out.row({res.moment, static_cast<double>(res.samples_used), res.residual_rms});
    std::printf("calibrated moment: %.6f A*m^2 from %d samples (residual %.3e T)\n", res.moment,
                res.samples_used, res.residual_rms);
}

void cmd_fieldmap(Run& run) {
    const Json& s = run.sc.section("fieldmap");
    std::string axis = config::string(s, "axis", "x");
    Vec3 dir;
    if (axis == "x")
        dir = Vec3::UnitX();
    else if (axis == "y")
        dir = Vec3::UnitY();
    else if (axis == "z")
        dir = Vec3::UnitZ();
    else
        throw ConfigError("fieldmap.axis must be x, y or z");
    double from = config::number(s, "from", defaults::kWorkingRangeMin);
    double to = config::number(s, "to", defaults::kWorkingRangeMax);
    int points = config::integer(s, "points", 100);
    if (!(from > 0.0 && from < to)) throw ConfigError("fieldmap needs 0 < from < to");
    if (points < 2) throw ConfigError("fieldmap.points must be at least 2");
    Vec3 m_hat = magnetics::unit_moment(config::number(s, "psi", 0.0), magnetics::Frame::Magnet);
    double M = moment(run);
    io::CsvWriter out(run.file("fieldmap.csv"),
                      "d_m,b_norm_T,b_axis_model_T,dbx_dd_T_per_m,dby_dd_T_per_m,dbz_dd_T_per_m");
    for (int i = 0; i < points; ++i) {
        double d = from + (to - from) * i / (points - 1);
        Vec3 p = d * dir;
        Vec3 b = magnetics::dipole_field(p, m_hat, M);
        Vec3 g = magnetics::dipole_gradient(p, m_hat, M) * dir;
        out.row({d, b.norm(), magnetics::on_axis_field(d, M), g.x(), g.y(), g.z()});
    }
}

void cmd_sweep(Run& run) {
    auto p = robot_params(run);
    auto grid = psi_grid(run);
    auto hs = heights(run, "sweep", {height(run)});
    auto opts = solver(run);
    io::CsvWriter summary(run.file("workspace.csv"),
                          "H_m,psi_min_rad,psi_max_rad,theta_min_rad,theta_max_rad,width_rad,mean_iterations");
    for (double h : hs) {
        auto act = actuation(run, p, h, 0.0);
        auto sw = elastica::workspace_sweep(p, act.magnet_position, act.moment, grid, plane(run), opts);
        char name[64];
        std::snprintf(name, sizeof name, "sweep_H%.4f.csv", h);
        io::CsvWriter out(run.file(name), "psi_rad,theta_L_rad,iterations");
        for (const auto& pt : sw.points) out.row({pt.psi, pt.theta_tip, static_cast<double>(pt.iterations)});
        summary.row({h, sw.psi_min, sw.psi_max, sw.theta_min, sw.theta_max, sw.width(), sw.mean_iterations});
        std::printf("H=%.4f m: workspace [%.6f, %.6f] rad, mean iterations %.3f\n", h, sw.theta_min,
                    sw.theta_max, sw.mean_iterations);
    }
}

void cmd_jacobian_map(Run& run) {
    auto p = robot_params(run);
    const Json& s = run.sc.section("jacobian");
    int n = config::integer(s, "psi_points", 64);
    if (n < 3) throw ConfigError("jacobian.psi_points must be at least 3");
    double delta = config::number(s, "delta", defaults::kPsiStep);
    if (!(delta > 0.0)) throw ConfigError("jacobian.delta must be positive");
    auto hs = heights(run, "jacobian", {0.18, 0.20, 0.22});
    auto grid = elastica::periodic_grid(n);
    auto pl = plane(run);
    io::CsvWriter out(run.file("jacobian_map.csv"), "psi_rad,H_m,J_analytic,J_numeric");
    io::CsvWriter agg(run.file("jacobian_rmse.csv"), "H_m,rmse,max_abs_error");
    for (double h : hs) {
        auto opts = solver(run);
        double ss = 0.0, worst = 0.0;
        for (double psi : grid) {
            auto act = actuation(run, p, h, psi);
            auto shape = elastica::solve_bvp(p, act, pl, opts);
            opts.initial_slope = shape.initial_slope();
            double ja = jacobian::analytic_jacobian(shape, act, p, pl).tip;
            double jn = jacobian::numeric_jacobian(p, act, pl, delta, opts, &shape);
            out.row({psi, h, ja, jn});
            ss += (ja - jn) * (ja - jn);
            worst = std::max(worst, std::abs(ja - jn));
        }
        agg.row({h, std::sqrt(ss / n), worst});
    }
}

void cmd_singularities(Run& run) {
    auto p = robot_params(run);
    const Json& s = run.sc.section("jacobian");
    int n = config::integer(s, "psi_points", 64);
    if (n < 3) throw ConfigError("jacobian.psi_points must be at least 3");
    auto hs = heights(run, "jacobian", {0.18, 0.20, 0.22});
    auto rows = jacobian::singularity_table(p, hs, moment(run), plane(run), n, solver(run));
    io::CsvWriter out(run.file("singularities.csv"), "H_m,psi_min_rad,psi_max_rad");
    for (const auto& r : rows) out.row({r.height, r.psi_min, r.psi_max});
}

void cmd_feasibility(Run& run) {
    auto p = robot_params(run);
    auto act = actuation(run, p, height(run), config::number(run.sc.section("magnet"), "psi", 0.0));
    auto pl = plane(run);
    auto shape = elastica::solve_bvp(p, act, pl, solver(run));
    auto rep = elastica::feasibility_check(p, act, pl, &shape);
    io::CsvWriter out(run.file("feasibility.csv"),
                      "threshold_m,min_distance_m,clearance_ok,threshold_ok,slender,in_plane,feasible");
    out.row({rep.threshold, rep.min_distance, double(rep.clearance_ok), double(rep.threshold_ok),
             double(rep.slender), double(rep.in_plane), double(rep.feasible())});
    std::printf("distance threshold: %.6f m\nminimum magnet distance: %.6f m\nfeasible: %s\n",
                rep.threshold, rep.min_distance, rep.feasible() ? "yes" : "no");
    if (!rep.slender) std::printf("warning: rod is not slender (L / 2r < 5)\n");
}

void cmd_simulate(Run& run) {
    auto p = robot_params(run);
    auto pl = plane(run);
    auto ctrl = controller(run);
    auto ref = reference(run);
    auto dist = disturbance(run);
    const Json& s = run.sc.section("sim");
    control::SimOptions o;
    o.dt = config::number(s, "dt", o.dt);
    o.duration = config::number(s, "duration", o.duration);
    o.seed = run.seed;
    o.solver = solver(run);
    std::string sensor = config::string(s, "sensor", "solver");
    if (sensor == "vision") {
        auto vo = vision_options(run);
        auto ro = raster_options(run);
        o.sensor = [vo, ro](const elastica::Shape& shape) {
            return vision::measure_tip(vision::rasterize(shape, ro), vo).angle;
        };
    } else if (sensor != "solver") {
        throw ConfigError("sim.sensor must be solver or vision");
    }
    auto act = actuation(run, p, height(run), config::number(run.sc.section("magnet"), "psi", 0.0));
    auto trace = control::simulate_closed_loop(p, act, pl, ctrl, ref, dist, o);
    control::write_trace(run.file("trace.csv"), trace);
    if (trace.rows.empty()) throw Error("simulation produced no samples: " + trace.abort_reason);
    auto m = control::trace_metrics(trace);
    int flips = control::sign_flips(trace, trace.rows.front().t, trace.rows.back().t);
    io::CsvWriter out(run.file("metrics.csv"),
                      "overshoot_pct,steady_state_error_rad,rmse_rad,control_energy,sign_flips,limit_hit,aborted");
    out.row({m.overshoot_pct, m.steady_state_error, m.rmse, m.control_energy, double(flips),
             double(trace.limit_hit), double(trace.aborted)});
    std::printf("%s: overshoot %.3f %%, steady-state error %.6f rad, sign flips %d%s\n",
                control::variant_name(ctrl.variant), m.overshoot_pct, m.steady_state_error, flips,
                trace.limit_hit ? ", joint limit reached" : "");
    if (trace.aborted) throw Error("simulation aborted: " + trace.abort_reason);
}

void cmd_track(Run& run) {
    const Json& s = run.sc.section("vision");
    auto vo = vision_options(run);
    std::vector<fs::path> frames;
    std::vector<double> truth;
    if (s.contains("frames")) {
        fs::path dir = run.sc.resolve(config::string(s, "frames", ""));
        if (!fs::is_directory(dir)) throw ConfigError("vision.frames is not a directory: " + dir.string());
        for (const auto& e : fs::directory_iterator(dir)) {
            auto ext = e.path().extension();
            if (ext == ".pgm" || ext == ".pbm") frames.push_back(e.path());
        }
        std::sort(frames.begin(), frames.end());
        if (frames.empty()) throw ConfigError("no .pgm or .pbm frames in " + dir.string());
    } else {
        int n = config::integer(s, "synthetic_frames", 50);
        if (n < 1) throw ConfigError("vision.synthetic_frames must be positive");
        auto p = robot_params(run);
        auto ro = raster_options(run);
        auto pl = plane(run);
        auto opts = solver(run);
        fs::create_directories(run.out / "frames");
        for (int i = 0; i < n; ++i) {
            double psi = -kPi + 2 * kPi * i / n;
            auto shape = elastica::solve_bvp(p, actuation(run, p, height(run), psi), pl, opts);
            opts.initial_slope = shape.initial_slope();
            char name[64];
            std::snprintf(name, sizeof name, "frames/frame_%04d.pgm", i);
            vision::write_pgm(run.file(name), vision::rasterize(shape, ro));
            frames.push_back(run.out / name);
            truth.push_back(shape.tip_angle());
        }
        io::CsvWriter t(run.file("truth.csv"), "frame,theta_L_rad");
        for (int i = 0; i < n; ++i) t.row({double(i), truth[i]});
    }
    io::CsvWriter out(run.file("track.csv"), "frame,theta_L_rad,branch,latency_ms");
    std::vector<double> lat;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto img = vision::read_image(frames[i]);
        auto t0 = std::chrono::steady_clock::now();
        auto m = vision::measure_tip(img, vo);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        lat.push_back(ms);
        out.line(std::to_string(i) + "," + io::format_number(m.angle) + "," +
                 vision::branch_name(m.fit.kind) + "," + io::format_number(ms));
    }
    std::nth_element(lat.begin(), lat.begin() + lat.size() / 2, lat.end());
    std::printf("tracked %zu frames, median latency %.3f ms\n", frames.size(), lat[lat.size() / 2]);
}

void cmd_follow_path(Run& run) {
    auto p = robot_params(run);
    const Json& s = run.sc.section("path");
    pathfollow::PathConfig cfg;
    cfg.height = height(run);
    cfg.moment = moment(run);
    cfg.plane = plane(run);
    cfg.solver = solver(run);
    cfg.k_x = config::number(s, "k_x", cfg.k_x);
    cfg.dt = config::number(s, "dt", cfg.dt);
    cfg.base_rate_limit = config::number(s, "base_rate_limit", cfg.base_rate_limit);
    cfg.psi_rate_limit = config::number(s, "psi_rate_limit", cfg.psi_rate_limit);
    cfg.nu_min = config::number(s, "nu_min", cfg.nu_min);
    cfg.nu_max = config::number(s, "nu_max", cfg.nu_max);
    cfg.step_budget = config::integer(s, "step_budget", cfg.step_budget);
    if (!(cfg.dt > 0.0) || !(cfg.k_x > 0.0)) throw ConfigError("path.dt and path.k_x must be positive");
    if (!(cfg.base_rate_limit > 0.0) || !(cfg.psi_rate_limit > 0.0))
        throw ConfigError("path rate limits must be positive");
    if (!(cfg.nu_min < cfg.nu_max)) throw ConfigError("path.nu_min must be below path.nu_max");

    pathfollow::PathSpec spec;
    if (s.contains("file")) {
        if (s.contains("generate")) throw ConfigError("path.file and path.generate are exclusive");
        spec = pathfollow::read_path(run.sc.resolve(config::string(s, "file", "")));
    } else {
        auto ws = pathfollow::compute_workspace(p, cfg);
        std::string kind = config::string(s, "generate", "two-arc");
        int n = config::integer(s, "samples", 100);
        double fill = config::number(s, "fill", 0.7);
        if (n < 4) throw ConfigError("path.samples must be at least 4");
        if (!(fill > 0.0 && fill < 1.0)) throw ConfigError("path.fill must lie in (0, 1)");
        if (kind == "two-arc")
            spec = pathfollow::two_arc_path(ws, cfg.plane, n, fill);
        else if (kind == "base-augmented")
            spec = pathfollow::base_augmented_path(ws, cfg.plane, n, config::number(s, "span", 0.01), fill);
        else
            throw ConfigError("path.generate must be two-arc or base-augmented");
    }
    spec.advance_threshold = config::number(s, "advance_threshold", spec.advance_threshold);
    spec.advance_window = config::integer(s, "advance_window", spec.advance_window);
    spec.advance_tolerance = config::number(s, "advance_tolerance", spec.advance_tolerance);
    if (spec.advance_window < 1) throw ConfigError("path.advance_window must be at least 1");

    pathfollow::write_path(run.file("path.csv"), spec);
    auto res = pathfollow::follow_path(p, spec, cfg);
    pathfollow::write_path_trace(run.file("path_trace.csv"), res);
    io::CsvWriter sum(run.file("path_summary.csv"), "waypoints,reached,rmse_m,rmse_pct_L,completed");
    sum.row({double(spec.waypoints.size()), double(res.waypoints_reached), res.rmse, res.rmse_pct,
             double(res.completed())});
    std::printf("rmse %.6e m (%.4f %% of L), %d of %zu waypoints reached\n", res.rmse, res.rmse_pct,
                res.waypoints_reached, spec.waypoints.size() - 1);
    if (!res.completed()) throw Error("path following stopped: " + res.message);
}

std::string defaults_text() {
    std::ostringstream o;
    o << "Defaults:\n"
      << "  magnet moment " << defaults::kMagnetMoment << " A*m^2, height " << defaults::kMagnetHeight
      << " m, working range [" << defaults::kWorkingRangeMin << ", " << defaults::kWorkingRangeMax << "] m\n"
      << "  solver " << defaults::kGridNodes << " intervals, tolerance " << defaults::kShootingTolerance
      << ", max " << defaults::kShootingMaxIterations << " iterations, sweep " << defaults::kSweepPoints
      << " points\n"
      << "  numeric Jacobian step " << defaults::kPsiStep << " rad, damping lambda " << defaults::kDamping
      << ", table " << defaults::kJacobianTablePoints << " points\n"
      << "  LESO beta1 " << defaults::kLesoBeta1 << " beta2 " << defaults::kLesoBeta2 << " eps "
      << defaults::kLesoEps << "; TD speed " << defaults::kTdSpeed << " k1 " << defaults::kTdK1 << " k2 "
      << defaults::kTdK2 << "; gain " << defaults::kGain << "\n"
      << "  joint limit +/-" << defaults::kJointLimit << " rad, dt " << defaults::kDt << " s, duration "
      << defaults::kDuration << " s\n"
      << "  vision threshold " << defaults::kLinearityThreshold << ", alpha step " << defaults::kAlphaStep
      << " rad, pitch " << defaults::kPixelPitch << " m/px, stroke " << defaults::kStrokeWidth
      << " px, tip window " << defaults::kTipWindow << "\n"
      << "  path k_x " << defaults::kTaskGain << ", advance " << defaults::kAdvanceThreshold << " over "
      << defaults::kAdvanceWindow << " steps or " << defaults::kAdvanceTolerance << " m, base rate "
      << defaults::kBaseRateLimit << " m/s, psi rate " << defaults::kPsiRateLimit << " rad/s\n"
      << "Config keys:\n"
      << config::schema_summary()
      << "Output root: --out, then the config's \"out\", then $MSCR_OUT_ROOT/<command>, then runs/<command>.\n";
    return o.str();
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Simulation toolkit for magnetically actuated soft continuum robots"};
    app.footer(defaults_text());
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", MSCR_VERSION);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "Scenario JSON file");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Random seed (overrides the config)");
    app.add_option("--set", sets, "Override a config key, e.g. --set sim.dt=0.005")->take_all();

    using Handler = void (*)(Run&);
    const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
        {"calibrate", "Fit the magnet moment to on-axis field samples", cmd_calibrate},
        {"fieldmap", "Field magnitude and gradient along an axis", cmd_fieldmap},
        {"sweep", "Tip angle over a psi grid per magnet height", cmd_sweep},
        {"jacobian-map", "Analytic vs numeric J_psi over psi and height", cmd_jacobian_map},
        {"singularities", "psi of the J_psi zero crossings per height", cmd_singularities},
        {"feasibility", "Magnet distance bound and clearance report", cmd_feasibility},
        {"simulate", "Closed-loop tip angle control scenario", cmd_simulate},
        {"track", "Tip angle from binarized frames", cmd_track},
        {"follow-path", "Tip position path following with base and magnet", cmd_follow_path},
    };
    for (const auto& [name, desc, fn] : commands) app.add_subcommand(name, desc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const char* chosen = nullptr;
    Handler handler = nullptr;
    for (const auto& [name, desc, fn] : commands)
        if (app.got_subcommand(name)) {
            chosen = name;
            handler = fn;
        }

    try {
        Run r;
        r.sc = config::load(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path), sets);
        r.seed = seed.value_or(static_cast<std::uint64_t>(config::integer(r.sc.doc, "seed", 1)));
        if (!out_dir.empty()) {
            r.out = out_dir;
        } else if (r.sc.doc.contains("out")) {
            r.out = r.sc.resolve(r.sc.doc["out"].get<std::string>());
        } else if (const char* root = std::getenv("MSCR_OUT_ROOT"); root && *root) {
            r.out = fs::path(root) / chosen;
        } else {
            r.out = fs::path("runs") / chosen;
        }
        fs::create_directories(r.out);

        auto t0 = std::chrono::steady_clock::now();
        std::string started = utc_now();
        handler(r);

        manifest::RunManifest m;
        m.command = chosen;
        m.version = MSCR_VERSION;
        m.config_file = config_path;
        m.config_sha256 = r.sc.input_sha256;
        m.effective_sha256 = r.sc.effective_sha256();
        m.overrides = sets;
        m.seed = r.seed;
        m.isa = kernels::isa_name(kernels::active_isa());
        m.started_utc = started;
        m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.files = r.files;
        manifest::write_manifest(r.out, m);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace mscr::cli
