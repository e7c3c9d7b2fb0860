#include "mscr/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace mscr::kernels {

bool isa_available(Isa isa) {
    switch (isa) {
    case Isa::Scalar:
        return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

Isa active_isa() {
    static const Isa isa = [] {
        const char* force = std::getenv("MSCR_FORCE_SCALAR");
        if (force && std::string(force) != "0") return Isa::Scalar;
        return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
    }();
    return isa;
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void FieldBatch::resize(std::size_t n) {
    for (auto* v : {&bx, &by, &bz, &gxx, &gxy, &gxz, &gyy, &gyz, &gzz}) v->resize(n);
}

Mat3 FieldBatch::gradient(std::size_t i) const {
    Mat3 g;
    g << gxx[i], gxy[i], gxz[i],
         gxy[i], gyy[i], gyz[i],
         gxz[i], gyz[i], gzz[i];
    return g;
}

ImageMoments image_moments(const std::uint8_t* px, int width, int height, Isa isa) {
    if (isa == Isa::Avx2 && isa_available(Isa::Avx2))
        return detail::image_moments_avx2(px, width, height);
    return detail::image_moments_scalar(px, width, height);
}

void dipole_batch(const double* x, const double* y, const double* z, std::size_t n,
                  const Vec3& m_hat, double moment, FieldBatch& out, Isa isa) {
    out.resize(n);
    double min_r2 = (isa == Isa::Avx2 && isa_available(Isa::Avx2))
                        ? detail::dipole_batch_avx2(x, y, z, n, m_hat, moment, out)
                        : detail::dipole_batch_scalar(x, y, z, n, m_hat, moment, out);
    if (n > 0 && !(min_r2 > 0.0))
        throw DomainError("dipole model evaluated at zero distance");
}

namespace detail {

ImageMoments image_moments_scalar(const std::uint8_t* px, int width, int height) {
    ImageMoments m;
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = px + static_cast<std::size_t>(y) * width;
        std::uint64_t n = 0, s1 = 0, s2 = 0;
        for (int x = 0; x < width; ++x) {
            if (!row[x]) continue;
            ++n;
            s1 += x;
            s2 += static_cast<std::uint64_t>(x) * x;
        }
        std::uint64_t uy = y;
        m.count += n;
        m.sx += s1;
        m.sy += uy * n;
        m.sxx += s2;
        m.sxy += uy * s1;
        m.syy += uy * uy * n;
    }
    return m;
}

double dipole_batch_scalar(const double* x, const double* y, const double* z, std::size_t n,
                           const Vec3& m, double moment, FieldBatch& out) {
    const double k3 = kMu0 * moment / (4.0 * kPi);
    double min_r2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double r2 = x[i] * x[i] + y[i] * y[i] + z[i] * z[i];
        min_r2 = std::min(min_r2, r2);
        double r = std::sqrt(r2);
        double ux = x[i] / r, uy = y[i] / r, uz = z[i] / r;
        double dot = ux * m.x() + uy * m.y() + uz * m.z();
        double c = k3 / (r2 * r);
        out.bx[i] = c * (3.0 * dot * ux - m.x());
        out.by[i] = c * (3.0 * dot * uy - m.y());
        out.bz[i] = c * (3.0 * dot * uz - m.z());
        double g = 3.0 * c / r;
        double f = 5.0 * dot;
        out.gxx[i] = g * (2.0 * ux * m.x() + dot - f * ux * ux);
        out.gyy[i] = g * (2.0 * uy * m.y() + dot - f * uy * uy);
        out.gzz[i] = g * (2.0 * uz * m.z() + dot - f * uz * uz);
        out.gxy[i] = g * (ux * m.y() + uy * m.x() - f * ux * uy);
        out.gxz[i] = g * (ux * m.z() + uz * m.x() - f * ux * uz);
        out.gyz[i] = g * (uy * m.z() + uz * m.y() - f * uy * uz);
    }
    return min_r2;
}

}  // namespace detail
}  // namespace mscr::kernels
