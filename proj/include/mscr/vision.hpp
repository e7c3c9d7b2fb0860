#pragma once

#include "mscr/elastica.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mscr::vision {

using Vec2 = Eigen::Vector2d;

/** @brief Binary image, row-major, one byte per pixel (0 background, 1 foreground). */
class BinaryImage {
public:
    BinaryImage() = default;
    BinaryImage(int width, int height, double pitch = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    double pitch() const { return pitch_; }
    void set_pitch(double p) { pitch_ = p; }

    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    std::uint8_t at(int x, int y) const { return in_bounds(x, y) ? px_[idx(x, y)] : 0; }
    void set(int x, int y, bool on = true) {
        if (in_bounds(x, y)) px_[idx(x, y)] = on ? 1 : 0;
    }
    /// Foreground count in the 3x3 neighborhood of (x, y).
    int neighborhood(int x, int y) const;
    const std::uint8_t* data() const { return px_.data(); }
    std::vector<Vec2> foreground() const;
    /// Copy shifted by (dx, dy) pixels on a canvas of the same size.
    BinaryImage shifted(int dx, int dy) const;

private:
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
    int width_ = 0, height_ = 0;
    double pitch_ = 0.0;
    std::vector<std::uint8_t> px_;
};

/// Mean foreground pixel coordinate (x = column, y = row).
Vec2 centroid(const BinaryImage& img);

/// lambda2 / lambda1 of the foreground coordinate covariance; 0 for a straight line.
double linearity(const BinaryImage& img);
double linearity(std::span<const Vec2> pts);

struct ConicFit {
    enum class Kind { Quadratic, Ellipse };
    Kind kind = Kind::Quadratic;
    // Quadratic branch: y = a x^2 + b x + c in image coordinates.
    double a = 0.0, b = 0.0, c = 0.0;
    // Ellipse branch: [x y 1] Q [x y 1]^T = 0.
    Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();
    Vec2 center = Vec2::Zero();
    double semi_major = 0.0, semi_minor = 0.0;
    double orientation = 0.0;  // angle of the major axis from +x, (-pi/2, pi/2]
    double residual_rms = 0.0; // pixels

    double eval(double x) const { return (a * x + b) * x + c; }
    Vec2 ellipse_point(double alpha) const;
    Vec2 ellipse_tangent(double alpha) const;  // d/d alpha
    Vec2 to_ellipse_frame(const Vec2& p) const;
};

const char* branch_name(ConicFit::Kind k);

/// Least-squares parabola through the points. Throws FitError when x has no spread.
ConicFit fit_quadratic(std::span<const Vec2> pts);
ConicFit fit_quadratic(const BinaryImage& img);

/// Direct ellipse-specific least-squares fit. Throws FitError on degenerate input.
ConicFit fit_ellipse(std::span<const Vec2> pts);
ConicFit fit_ellipse(const BinaryImage& img);

struct TraceResult {
    Vec2 tip = Vec2::Zero();
    double alpha = 0.0;        // ellipse branch end parameter
    double slope_angle = 0.0;  // line angle of the tangent at the tip, (-pi/2, pi/2]
    double angle = 0.0;        // oriented tangent angle along the walk, frame-G sign
    ConicFit::Kind branch = ConicFit::Kind::Quadratic;
    int steps = 0;
    double arc = 0.0;          // walked arc length, pixels
};

/**
 * @brief Walk along the fitted conic from start in direction +1 or -1 until the
 * 3x3 neighborhood is empty; returns the last foreground point.
 * @throws FitError when start is off the foreground or the walk leaves the image.
 */
TraceResult trace_to_tip(const BinaryImage& img, const ConicFit& fit, const Vec2& start,
                         int direction, double alpha_step = defaults::kAlphaStep);

struct VisionOptions {
    double threshold = defaults::kLinearityThreshold;
    double alpha_step = defaults::kAlphaStep;
    /// Local re-fit of the tangent near the tip over this fraction of the traced length; 0 disables.
    double tip_window = defaults::kTipWindow;
    /// End slopes closer than this (rad) count as a tie.
    double slope_tie = defaults::kSlopeTie;
};

struct Measurement {
    double angle = 0.0;        // tip angle, rad
    double conic_angle = 0.0;  // before local refinement
    double linearity = 0.0;
    ConicFit fit;
    TraceResult tip;
    TraceResult other;         // the trace toward the opposite end
};

Measurement measure_tip(const BinaryImage& img, const VisionOptions& opts = {});
double tip_angle_from_image(const BinaryImage& img, double threshold = defaults::kLinearityThreshold);

struct RasterOptions {
    double pitch = defaults::kPixelPitch;  // m per pixel
    int stroke = defaults::kStrokeWidth;   // pixels
    int width = 0, height = 0;             // 0 = fit to the shape
    int margin = 16;                       // pixels, auto-sized canvas
};

/// Stamp the in-plane body curve; base at the left, +x to the right, +y up.
BinaryImage rasterize(const elastica::Shape& shape, const RasterOptions& opts = {});

BinaryImage read_image(const std::filesystem::path& path);  // P5 (threshold 128) or P4
void write_pgm(const std::filesystem::path& path, const BinaryImage& img);

}  // namespace mscr::vision
