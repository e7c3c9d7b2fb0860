#include "mscr/magnetics.hpp"

#include "mscr/io.hpp"

#include <cmath>
#include <random>

namespace mscr::magnetics {

namespace {

struct Radial {
    double r;
    Vec3 u;  // unit direction
};

Radial radial(const Vec3& p) {
    double r = p.norm();
    if (!(r > 0.0) || !std::isfinite(r))
        throw DomainError("dipole model evaluated at zero or non-finite distance");
    return {r, p / r};
}

}  // namespace

Vec3 unit_moment(double psi, Frame frame) {
    if (frame == Frame::Magnet) return {std::cos(psi), std::sin(psi), 0.0};
    return {-std::cos(psi), std::sin(psi), 0.0};
}

Vec3 unit_moment_in_plane(double psi, double phi) {
    // -cos(psi) x^ + sin(psi) o^, with o^ = [0, cos phi, sin phi]
    return {-std::cos(psi), std::sin(psi) * std::cos(phi), std::sin(psi) * std::sin(phi)};
}

Vec3 unit_moment_in_plane_dpsi(double psi, double phi) {
    return {std::sin(psi), std::cos(psi) * std::cos(phi), std::cos(psi) * std::sin(phi)};
}

Vec3 dipole_field(const Vec3& p, const Vec3& m_hat, double moment) {
    auto [r, u] = radial(p);
    double c = kMu0 * moment / (4.0 * kPi * r * r * r);
    return c * (3.0 * u * u.dot(m_hat) - m_hat);
}

Mat3 dipole_gradient(const Vec3& p, const Vec3& m_hat, double moment) {
    auto [r, u] = radial(p);
    double c = 3.0 * kMu0 * moment / (4.0 * kPi * r * r * r * r);
    Mat3 Z = Mat3::Identity() - 5.0 * u * u.transpose();
    return c * (u * m_hat.transpose() + u.dot(m_hat) * Mat3::Identity() + Z * m_hat * u.transpose());
}

Mat3 field_operator(const Vec3& p, double moment) {
    auto [r, u] = radial(p);
    double c = kMu0 * moment / (4.0 * kPi * r * r * r);
    return c * (3.0 * u * u.transpose() - Mat3::Identity());
}

Mat3 gradient_operator(const Vec3& p, const Vec3& v, double moment) {
    auto [r, u] = radial(p);
    double c = 3.0 * kMu0 * moment / (4.0 * kPi * r * r * r * r);
    Mat3 Z = Mat3::Identity() - 5.0 * u * u.transpose();
    return c * (u * v.transpose() + v * u.transpose() + u.dot(v) * Z);
}

double on_axis_field(double d, double moment) {
    if (!(d > 0.0)) throw DomainError("on-axis field needs d > 0");
    return kMu0 * moment / (2.0 * kPi * d * d * d);
}

CalibrationResult calibrate_moment(std::span<const FieldSample> samples, WorkingRange range) {
    if (!(range.lo > 0.0 && range.lo < range.hi))
        throw CalibrationError("working range must satisfy 0 < d_min < d_max");
    double sbg = 0.0, sgg = 0.0;
    int used = 0;
    for (const auto& s : samples) {
        if (!range.contains(s.distance)) continue;
        double g = on_axis_field(s.distance, 1.0);
        sbg += s.magnitude * g;
        sgg += g * g;
        ++used;
    }
    if (used == 0) throw CalibrationError("no field samples inside the working range");

    CalibrationResult res;
    res.moment = sbg / sgg;
    res.samples_used = used;
    double ss = 0.0;
    for (const auto& s : samples) {
        if (!range.contains(s.distance)) continue;
        double e = s.magnitude - res.moment * on_axis_field(s.distance, 1.0);
        ss += e * e;
    }
    res.residual_rms = std::sqrt(ss / used);
    return res;
}

std::vector<FieldSample> synthetic_samples(double moment, WorkingRange range, int count,
                                           double rel_noise, std::uint64_t seed) {
    if (count < 1) throw CalibrationError("sample count must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<FieldSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        double d = count == 1 ? range.lo : range.lo + (range.hi - range.lo) * i / (count - 1);
        double b = on_axis_field(d, moment);
        if (rel_noise > 0.0) b *= 1.0 + rel_noise * noise(rng);
        out.push_back({d, std::max(b, 0.0)});
    }
    return out;
}

std::vector<FieldSample> read_samples(const std::filesystem::path& path) {
    auto rows = io::read_numeric_csv(path, {"d_m", "B_T"});
    std::vector<FieldSample> out;
    for (auto& r : rows) {
        if (!(r[0] > 0.0) || r[1] < 0.0)
            throw CalibrationError(path.string() + ": samples need d > 0 and B >= 0");
        out.push_back({r[0], r[1]});
    }
    return out;
}

void write_samples(const std::filesystem::path& path, std::span<const FieldSample> samples) {
    io::CsvWriter w(path, "d_m,B_T");
    for (const auto& s : samples) w.row({s.distance, s.magnitude});
}

}  // namespace mscr::magnetics
