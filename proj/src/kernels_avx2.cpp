// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "mscr/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace mscr::kernels::detail {

namespace {

// Weighted popcounts give the sum of set-bit indices and squared indices of a 32-bit mask.
constexpr std::uint32_t kBitMask[5] = {0xAAAAAAAAu, 0xCCCCCCCCu, 0xF0F0F0F0u, 0xFF00FF00u,
                                       0xFFFF0000u};

inline void bit_index_sums(std::uint32_t bits, std::uint64_t& s1, std::uint64_t& s2) {
    std::uint64_t a = 0, b = 0;
    for (int k = 0; k < 5; ++k) {
        std::uint32_t bk = bits & kBitMask[k];
        a += static_cast<std::uint64_t>(__builtin_popcount(bk)) << k;
        b += static_cast<std::uint64_t>(__builtin_popcount(bk)) << (2 * k);
        for (int l = k + 1; l < 5; ++l)
            b += static_cast<std::uint64_t>(__builtin_popcount(bk & kBitMask[l])) << (k + l + 1);
    }
    s1 = a;
    s2 = b;
}

}  // namespace

ImageMoments image_moments_avx2(const std::uint8_t* px, int width, int height) {
    ImageMoments m;
    const __m256i zero = _mm256_setzero_si256();
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = px + static_cast<std::size_t>(y) * width;
        std::uint64_t n = 0, s1 = 0, s2 = 0;
        int x = 0;
        for (; x + 32 <= width; x += 32) {
            __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + x));
            std::uint32_t bits = ~static_cast<std::uint32_t>(
                _mm256_movemask_epi8(_mm256_cmpeq_epi8(v, zero)));
            if (!bits) continue;
            std::uint64_t c = __builtin_popcount(bits), i1, i2;
            bit_index_sums(bits, i1, i2);
            std::uint64_t x0 = x;
            // sum (x0+i) and sum (x0+i)^2 over set bits
            n += c;
            s1 += c * x0 + i1;
            s2 += c * x0 * x0 + 2 * x0 * i1 + i2;
        }
        for (; x < width; ++x) {
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

double dipole_batch_avx2(const double* x, const double* y, const double* z, std::size_t n,
                         const Vec3& m, double moment, FieldBatch& out) {
    const double k3 = kMu0 * moment / (4.0 * kPi);
    const __m256d vk3 = _mm256_set1_pd(k3);
    const __m256d mx = _mm256_set1_pd(m.x()), my = _mm256_set1_pd(m.y()), mz = _mm256_set1_pd(m.z());
    const __m256d one = _mm256_set1_pd(1.0), two = _mm256_set1_pd(2.0);
    const __m256d three = _mm256_set1_pd(3.0), five = _mm256_set1_pd(5.0);
    __m256d vmin = _mm256_set1_pd(std::numeric_limits<double>::infinity());

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d px = _mm256_loadu_pd(x + i), py = _mm256_loadu_pd(y + i), pz = _mm256_loadu_pd(z + i);
        __m256d r2 = _mm256_fmadd_pd(px, px, _mm256_fmadd_pd(py, py, _mm256_mul_pd(pz, pz)));
        vmin = _mm256_min_pd(vmin, r2);
        __m256d r = _mm256_sqrt_pd(r2);
        __m256d inv = _mm256_div_pd(one, r);
        __m256d ux = _mm256_mul_pd(px, inv), uy = _mm256_mul_pd(py, inv), uz = _mm256_mul_pd(pz, inv);
        __m256d dot = _mm256_fmadd_pd(ux, mx, _mm256_fmadd_pd(uy, my, _mm256_mul_pd(uz, mz)));
        __m256d c = _mm256_div_pd(vk3, _mm256_mul_pd(r2, r));
        __m256d d3 = _mm256_mul_pd(three, dot);
        _mm256_storeu_pd(&out.bx[i], _mm256_mul_pd(c, _mm256_fmsub_pd(d3, ux, mx)));
        _mm256_storeu_pd(&out.by[i], _mm256_mul_pd(c, _mm256_fmsub_pd(d3, uy, my)));
        _mm256_storeu_pd(&out.bz[i], _mm256_mul_pd(c, _mm256_fmsub_pd(d3, uz, mz)));

        __m256d g = _mm256_mul_pd(_mm256_mul_pd(three, c), inv);
        __m256d f = _mm256_mul_pd(five, dot);
        auto diag = [&](__m256d u, __m256d mu) {
            // g * (2 u m + dot - f u u)
            __m256d t = _mm256_fmadd_pd(_mm256_mul_pd(two, u), mu, dot);
            return _mm256_mul_pd(g, _mm256_fnmadd_pd(_mm256_mul_pd(f, u), u, t));
        };
        auto off = [&](__m256d ua, __m256d mb, __m256d ub, __m256d ma) {
            // g * (ua mb + ub ma - f ua ub)
            __m256d t = _mm256_fmadd_pd(ua, mb, _mm256_mul_pd(ub, ma));
            return _mm256_mul_pd(g, _mm256_fnmadd_pd(_mm256_mul_pd(f, ua), ub, t));
        };
        _mm256_storeu_pd(&out.gxx[i], diag(ux, mx));
        _mm256_storeu_pd(&out.gyy[i], diag(uy, my));
        _mm256_storeu_pd(&out.gzz[i], diag(uz, mz));
        _mm256_storeu_pd(&out.gxy[i], off(ux, my, uy, mx));
        _mm256_storeu_pd(&out.gxz[i], off(ux, mz, uz, mx));
        _mm256_storeu_pd(&out.gyz[i], off(uy, mz, uz, my));
    }

    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vmin);
    double min_r2 = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
    if (i < n) {
        // Tail through the scalar reference on shifted views.
        FieldBatch tail;
        tail.resize(n - i);
        min_r2 = std::min(min_r2, dipole_batch_scalar(x + i, y + i, z + i, n - i, m, moment, tail));
        for (std::size_t j = 0; j < n - i; ++j) {
            out.bx[i + j] = tail.bx[j];
            out.by[i + j] = tail.by[j];
            out.bz[i + j] = tail.bz[j];
            out.gxx[i + j] = tail.gxx[j];
            out.gxy[i + j] = tail.gxy[j];
            out.gxz[i + j] = tail.gxz[j];
            out.gyy[i + j] = tail.gyy[j];
            out.gyz[i + j] = tail.gyz[j];
            out.gzz[i + j] = tail.gzz[j];
        }
    }
    return min_r2;
}

}  // namespace mscr::kernels::detail

#else

// Non-x86 builds never select the AVX2 path; keep the symbols for the dispatcher.
namespace mscr::kernels::detail {

ImageMoments image_moments_avx2(const std::uint8_t* px, int width, int height) {
    return image_moments_scalar(px, width, height);
}

double dipole_batch_avx2(const double* x, const double* y, const double* z, std::size_t n,
                         const Vec3& m_hat, double moment, FieldBatch& out) {
    return dipole_batch_scalar(x, y, z, n, m_hat, moment, out);
}

}  // namespace mscr::kernels::detail

#endif
