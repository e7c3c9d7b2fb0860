#pragma once

#include "mscr/common.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

/**
 * @brief Data-parallel kernels with a scalar reference and an AVX2 variant.
 *
 * The dispatching entry points pick the widest variant the CPU supports at
 * runtime. Setting MSCR_FORCE_SCALAR=1 in the environment pins the scalar path.
 */
namespace mscr::kernels {

enum class Isa { Scalar, Avx2 };

Isa active_isa();
const char* isa_name(Isa isa);
bool isa_available(Isa isa);

/// Raw pixel moments of the nonzero pixels of an 8-bit image.
struct ImageMoments {
    std::uint64_t count = 0;
    std::uint64_t sx = 0, sy = 0;
    std::uint64_t sxx = 0, sxy = 0, syy = 0;
    bool operator==(const ImageMoments&) const = default;
};

ImageMoments image_moments(const std::uint8_t* px, int width, int height, Isa isa);
inline ImageMoments image_moments(const std::uint8_t* px, int width, int height) {
    return image_moments(px, width, height, active_isa());
}

/// Structure-of-arrays field and gradient (upper triangle) of a dipole at n points.
struct FieldBatch {
    std::vector<double> bx, by, bz;
    std::vector<double> gxx, gxy, gxz, gyy, gyz, gzz;
    void resize(std::size_t n);
    std::size_t size() const { return bx.size(); }
    Vec3 field(std::size_t i) const { return {bx[i], by[i], bz[i]}; }
    Mat3 gradient(std::size_t i) const;
};

/**
 * @brief Dipole field and gradient at n relative positions p = (x,y,z).
 * @throws DomainError if any point coincides with the dipole.
 */
void dipole_batch(const double* x, const double* y, const double* z, std::size_t n,
                  const Vec3& m_hat, double moment, FieldBatch& out, Isa isa);
inline void dipole_batch(const double* x, const double* y, const double* z, std::size_t n,
                         const Vec3& m_hat, double moment, FieldBatch& out) {
    dipole_batch(x, y, z, n, m_hat, moment, out, active_isa());
}

// Variant entry points, exposed for equivalence tests.
namespace detail {
ImageMoments image_moments_scalar(const std::uint8_t* px, int width, int height);
ImageMoments image_moments_avx2(const std::uint8_t* px, int width, int height);
// Return the minimum squared distance seen so the caller can reject r = 0.
double dipole_batch_scalar(const double* x, const double* y, const double* z, std::size_t n,
                           const Vec3& m_hat, double moment, FieldBatch& out);
double dipole_batch_avx2(const double* x, const double* y, const double* z, std::size_t n,
                         const Vec3& m_hat, double moment, FieldBatch& out);
}  // namespace detail

}  // namespace mscr::kernels
