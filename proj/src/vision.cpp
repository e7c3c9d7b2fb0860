#include "mscr/vision.hpp"

#include "mscr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace mscr::vision {

BinaryImage::BinaryImage(int width, int height, double pitch)
    : width_(width), height_(height), pitch_(pitch) {
    if (width <= 0 || height <= 0) throw DomainError("image dimensions must be positive");
    px_.assign(static_cast<std::size_t>(width) * height, 0);
}

int BinaryImage::neighborhood(int x, int y) const {
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) n += at(x + dx, y + dy);
    return n;
}

std::vector<Vec2> BinaryImage::foreground() const {
    std::vector<Vec2> pts;
    for (int y = 0; y < height_; ++y) {
        const std::uint8_t* row = px_.data() + idx(0, y);
        for (int x = 0; x < width_; ++x)
            if (row[x]) pts.emplace_back(x, y);
    }
    return pts;
}

BinaryImage BinaryImage::shifted(int dx, int dy) const {
    BinaryImage out(width_, height_, pitch_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (px_[idx(x, y)]) out.set(x + dx, y + dy);
    return out;
}

// ---------------------------------------------------------------------------
// Moments

namespace {

struct Moments {
    double n, mx, my, cxx, cxy, cyy;
};

Moments central_moments(const BinaryImage& img) {
    auto m = kernels::image_moments(img.data(), img.width(), img.height());
    if (m.count == 0) throw FitError("image has no foreground pixels");
    double n = static_cast<double>(m.count);
    double mx = m.sx / n, my = m.sy / n;
    return {n, mx, my, m.sxx / n - mx * mx, m.sxy / n - mx * my, m.syy / n - my * my};
}

double eigen_ratio(double cxx, double cxy, double cyy) {
    double tr = cxx + cyy;
    double disc = std::sqrt(std::max(0.0, 0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy));
    double l1 = 0.5 * tr + disc, l2 = 0.5 * tr - disc;
    if (!(l1 > 0.0)) throw FitError("linearity needs at least two distinct pixels");
    return std::max(0.0, l2) / l1;
}

}  // namespace

Vec2 centroid(const BinaryImage& img) {
    auto m = central_moments(img);
    return {m.mx, m.my};
}

double linearity(const BinaryImage& img) {
    auto m = central_moments(img);
    return eigen_ratio(m.cxx, m.cxy, m.cyy);
}

double linearity(std::span<const Vec2> pts) {
    if (pts.size() < 2) throw FitError("linearity needs at least two points");
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double cxx = 0, cxy = 0, cyy = 0;
    for (const auto& p : pts) {
        Vec2 d = p - mean;
        cxx += d.x() * d.x();
        cxy += d.x() * d.y();
        cyy += d.y() * d.y();
    }
    return eigen_ratio(cxx, cxy, cyy);
}

// ---------------------------------------------------------------------------
// Conic fits

const char* branch_name(ConicFit::Kind k) {
    return k == ConicFit::Kind::Quadratic ? "quadratic" : "ellipse";
}

namespace {

Eigen::Matrix2d rotation(double w) {
    Eigen::Matrix2d R;
    R << std::cos(w), -std::sin(w), std::sin(w), std::cos(w);
    return R;
}

}  // namespace

Vec2 ConicFit::ellipse_point(double alpha) const {
    return center + rotation(orientation) * Vec2(semi_major * std::cos(alpha), semi_minor * std::sin(alpha));
}

Vec2 ConicFit::ellipse_tangent(double alpha) const {
    return rotation(orientation) * Vec2(-semi_major * std::sin(alpha), semi_minor * std::cos(alpha));
}

Vec2 ConicFit::to_ellipse_frame(const Vec2& p) const {
    return rotation(orientation).transpose() * (p - center);
}

ConicFit fit_quadratic(std::span<const Vec2> pts) {
    if (pts.size() < 3) throw FitError("quadratic fit needs at least three points");
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    double mx = 0.0;
    for (const auto& p : pts) mx += p.x();
    mx /= n;
    double var = 0.0;
    for (const auto& p : pts) var += (p.x() - mx) * (p.x() - mx);
    double sx = std::sqrt(var / n);
    if (!(sx > 0.0)) throw FitError("quadratic fit is rank deficient (no spread in x)");

    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double t = (pts[i].x() - mx) / sx;
        A.row(i) << 1.0, t, t * t;
        y[i] = pts[i].y();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) throw FitError("quadratic fit is rank deficient");
    Eigen::Vector3d p = qr.solve(y);

    ConicFit f;
    f.kind = ConicFit::Kind::Quadratic;
    f.a = p[2] / (sx * sx);
    f.b = p[1] / sx - 2.0 * p[2] * mx / (sx * sx);
    f.c = p[0] - p[1] * mx / sx + p[2] * mx * mx / (sx * sx);
    double ss = (A * p - y).squaredNorm();
    f.residual_rms = std::sqrt(ss / n);
    return f;
}

ConicFit fit_quadratic(const BinaryImage& img) {
    auto pts = img.foreground();
    return fit_quadratic(pts);
}

ConicFit fit_ellipse(std::span<const Vec2> pts) {
    if (pts.size() < 6) throw FitError("ellipse fit needs at least six points");
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(n);
    double scale = 0.0;
    for (const auto& p : pts) scale += (p - mean).squaredNorm();
    scale = std::sqrt(scale / n);
    if (!(scale > 0.0)) throw FitError("ellipse fit on coincident points");

    // Split design (quadratic / linear parts) of the ellipse-constrained direct fit.
    Eigen::MatrixXd D1(n, 3), D2(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x = (pts[i].x() - mean.x()) / scale, y = (pts[i].y() - mean.y()) / scale;
        D1.row(i) << x * x, x * y, y * y;
        D2.row(i) << x, y, 1.0;
    }
    Eigen::Matrix3d S1 = D1.transpose() * D1, S2 = D1.transpose() * D2, S3 = D2.transpose() * D2;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(S3);
    if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12 * std::pow(S3.norm(), 3))
        throw FitError("ellipse fit is degenerate (collinear points)");
    Eigen::Matrix3d T = -lu.solve(S2.transpose());
    Eigen::Matrix3d M = S1 + S2 * T;
    Eigen::Matrix3d Cinv;
    Cinv << 0, 0, 0.5, 0, -1, 0, 0.5, 0, 0;
    M = Cinv * M;
    Eigen::EigenSolver<Eigen::Matrix3d> es(M);
    Eigen::Vector3d a1;
    bool found = false;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d v = es.eigenvectors().col(k).real();
        double cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if (cond > 0.0 && cond > best) {
            best = cond;
            a1 = v;
            found = true;
        }
    }
    if (!found) throw FitError("no ellipse solution (points are not elliptical)");
    Eigen::Vector3d a2 = T * a1;

    Eigen::Matrix3d Qn;
    Qn << a1[0], a1[1] / 2, a2[0] / 2,
          a1[1] / 2, a1[2], a2[1] / 2,
          a2[0] / 2, a2[1] / 2, a2[2];
    Eigen::Matrix3d N;
    N << 1 / scale, 0, -mean.x() / scale,
         0, 1 / scale, -mean.y() / scale,
         0, 0, 1;
    Eigen::Matrix3d Q = N.transpose() * Qn * N;
    Q /= Q.norm();

    ConicFit f;
    f.kind = ConicFit::Kind::Ellipse;
    f.Q = Q;
    Eigen::Matrix2d A22 = Q.topLeftCorner<2, 2>();
    Vec2 q = Q.block<2, 1>(0, 2);
    f.center = -A22.ldlt().solve(q);
    double Fc = q.dot(f.center) + Q(2, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> se(A22);
    Eigen::Vector2d lam = se.eigenvalues();
    if (!(lam[0] * lam[1] > 0.0) || !(-Fc / lam[0] > 0.0))
        throw FitError("fitted conic is not a real ellipse");
    // Smaller |eigenvalue| belongs to the major axis.
    int major = std::abs(lam[0]) <= std::abs(lam[1]) ? 0 : 1;
    f.semi_major = std::sqrt(-Fc / lam[major]);
    f.semi_minor = std::sqrt(-Fc / lam[1 - major]);
    Vec2 axis = se.eigenvectors().col(major);
    double w = std::atan2(axis.y(), axis.x());
    if (w <= -kPi / 2) w += kPi;
    if (w > kPi / 2) w -= kPi;
    f.orientation = w;

    double ss = 0.0;
    for (const auto& p : pts) {
        Eigen::Vector3d h(p.x(), p.y(), 1.0);
        double val = h.dot(Q * h);
        Vec2 grad = 2.0 * (A22 * p + q);
        double g = grad.norm();
        double d = g > 0 ? val / g : 0.0;
        ss += d * d;
    }
    f.residual_rms = std::sqrt(ss / n);
    return f;
}

ConicFit fit_ellipse(const BinaryImage& img) {
    auto pts = img.foreground();
    return fit_ellipse(pts);
}

// ---------------------------------------------------------------------------
// Tracing

namespace {

int iround(double v) { return static_cast<int>(std::lround(v)); }

bool on_body(const BinaryImage& img, const Vec2& p) {
    return img.neighborhood(iround(p.x()), iround(p.y())) > 0;
}

// Image y points down; angles are reported with y up.
double oriented_angle(const Vec2& dir) { return std::atan2(-dir.y(), dir.x()); }

double line_angle(const Vec2& dir) {
    if (dir.x() == 0.0) return kPi / 2;
    return std::atan(-dir.y() / dir.x());
}

}  // namespace

TraceResult trace_to_tip(const BinaryImage& img, const ConicFit& fit, const Vec2& start,
                         int direction, double alpha_step) {
    if (direction != 1 && direction != -1) throw DomainError("trace direction must be +1 or -1");
    TraceResult res;
    res.branch = fit.kind;
    const int max_steps = 4 * (img.width() + img.height());

    if (fit.kind == ConicFit::Kind::Quadratic) {
        double tx = start.x(), ty = fit.eval(tx);
        if (!on_body(img, {tx, ty})) throw FitError("trace start is not on the foreground");
        Vec2 last(tx, ty);
        for (int k = 0;; ++k) {
            if (k > max_steps) throw FitError("trace did not terminate");
            // forward difference of the parabola for a unit step
            ty += direction > 0 ? 2 * fit.a * tx + fit.a + fit.b : -2 * fit.a * tx + fit.a - fit.b;
            tx += direction;
            if (tx < -1 || ty < -1 || tx > img.width() || ty > img.height())
                throw FitError("trace left the image");
            if (!on_body(img, {tx, ty})) break;
            res.arc += (Vec2(tx, ty) - last).norm();
            last = {tx, ty};
            ++res.steps;
        }
        res.tip = last;
        Vec2 dir(direction, direction * (2 * fit.a * last.x() + fit.b));
        res.angle = oriented_angle(dir);
        res.slope_angle = line_angle(dir);
        return res;
    }

    if (!(alpha_step > 0.0)) throw DomainError("alpha step must be positive");
    Vec2 ge = fit.to_ellipse_frame(start);
    double alpha = std::atan2(ge.y() / fit.semi_minor, ge.x() / fit.semi_major);
    if (!on_body(img, fit.ellipse_point(alpha))) throw FitError("trace start is not on the foreground");
    const int max_alpha = static_cast<int>(std::ceil(2 * kPi / alpha_step)) + 1;
    double on = alpha, off = alpha;
    bool closed = true;
    for (int k = 0; k < max_alpha; ++k) {
        double next = on + direction * alpha_step;
        if (!on_body(img, fit.ellipse_point(next))) {
            off = next;
            closed = false;
            break;
        }
        res.arc += (fit.ellipse_point(next) - fit.ellipse_point(on)).norm();
        on = next;
        ++res.steps;
    }
    if (closed) throw FitError("ellipse trace never left the foreground");
    // Narrow the last coarse step to sub-pixel arc length.
    while ((fit.ellipse_point(off) - fit.ellipse_point(on)).norm() > 0.25) {
        double mid = 0.5 * (on + off);
        if (on_body(img, fit.ellipse_point(mid))) {
            res.arc += (fit.ellipse_point(mid) - fit.ellipse_point(on)).norm();
            on = mid;
        } else {
            off = mid;
        }
    }
    res.alpha = on;
    res.tip = fit.ellipse_point(on);
    Vec2 dir = direction * fit.ellipse_tangent(on);
    res.angle = oriented_angle(dir);
    res.slope_angle = line_angle(dir);
    return res;
}

namespace {

// Signed curvature (rad per pixel, y up) of the conic at the traced tip, along the travel direction.
double conic_curvature(const ConicFit& fit, const TraceResult& tip, int direction) {
    double a0, a1, ds;
    if (fit.kind == ConicFit::Kind::Quadratic) {
        const double h = 1.0;
        double x0 = tip.tip.x(), x1 = x0 - direction * h;
        a0 = oriented_angle(Vec2(direction, direction * (2 * fit.a * x0 + fit.b)));
        a1 = oriented_angle(Vec2(direction, direction * (2 * fit.a * x1 + fit.b)));
        ds = (Vec2(x0, fit.eval(x0)) - Vec2(x1, fit.eval(x1))).norm();
    } else {
        const double d = 1e-3;
        double al0 = tip.alpha, al1 = tip.alpha - direction * d;
        a0 = oriented_angle(direction * fit.ellipse_tangent(al0));
        a1 = oriented_angle(direction * fit.ellipse_tangent(al1));
        ds = (fit.ellipse_point(al0) - fit.ellipse_point(al1)).norm();
    }
    double da = std::remainder(a0 - a1, 2 * kPi);
    return ds > 0 ? da / ds : 0.0;
}

// Tip-aligned frame (xi outward along the conic tangent, eta to its left, y up).
std::vector<Vec2> tip_frame(const std::vector<Vec2>& pts, const TraceResult& tip, double radius) {
    const double c = std::cos(tip.angle), s = std::sin(tip.angle);
    std::vector<Vec2> local;
    for (const auto& p : pts) {
        Vec2 rel(p.x() - tip.tip.x(), -(p.y() - tip.tip.y()));
        if (rel.squaredNorm() > radius * radius) continue;
        local.emplace_back(rel.x() * c + rel.y() * s, -rel.x() * s + rel.y() * c);
    }
    return local;
}

// Re-fit the centerline near the tip. Bending comes from a quadratic over the wide window
// (or the conic when that fit fails); offset and slope from a line over the inner half.
double refine_tip_angle(const std::vector<Vec2>& pts, const TraceResult& tip, double kappa, double radius) {
    auto wide = tip_frame(pts, tip, radius);
    if (wide.size() >= 12) {
        try {
            kappa = 2.0 * fit_quadratic(wide).a;
        } catch (const FitError&) {
        }
    }
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : wide) {
        if (p.squaredNorm() > 0.25 * radius * radius) continue;
        double xi = p.x(), eta = p.y() - 0.5 * kappa * xi * xi;
        sw += 1;
        sx += xi;
        sy += eta;
        sxx += xi * xi;
        sxy += xi * eta;
    }
    double det = sw * sxx - sx * sx;
    if (sw < 12 || !(det > 1e-9 * sw * sxx)) return tip.angle;
    return tip.angle + std::atan((sw * sxy - sx * sy) / det);
}

}  // namespace

Measurement measure_tip(const BinaryImage& img, const VisionOptions& opts) {
    auto pts = img.foreground();
    if (pts.empty()) throw FitError("image has no foreground pixels");
    Measurement m;
    m.linearity = linearity(img);
    Vec2 g = centroid(img);

    bool quadratic = m.linearity <= opts.threshold;
    try {
        m.fit = quadratic ? fit_quadratic(pts) : fit_ellipse(pts);
    } catch (const FitError&) {
        m.fit = quadratic ? fit_ellipse(pts) : fit_quadratic(pts);
    }
    Vec2 start = m.fit.kind == ConicFit::Kind::Quadratic ? Vec2(g.x(), m.fit.eval(g.x())) : g;
    Vec2 on_curve = m.fit.kind == ConicFit::Kind::Quadratic ? start : [&] {
        Vec2 e = m.fit.to_ellipse_frame(start);
        return m.fit.ellipse_point(std::atan2(e.y() / m.fit.semi_minor, e.x() / m.fit.semi_major));
    }();
    if (!on_body(img, on_curve)) {
        // Curled bodies can put the centroid's conic point off the body; start from the nearest pixel.
        auto nearest = std::min_element(pts.begin(), pts.end(), [&](const Vec2& a, const Vec2& b) {
            return (a - g).squaredNorm() < (b - g).squaredNorm();
        });
        start = *nearest;
    }
    TraceResult fwd = trace_to_tip(img, m.fit, start, +1, opts.alpha_step);
    TraceResult bwd = trace_to_tip(img, m.fit, start, -1, opts.alpha_step);
    // Nearly straight bodies give equal end slopes; then the rightmost end is the tip.
    double gap = std::abs(fwd.slope_angle) - std::abs(bwd.slope_angle);
    bool pick_fwd = std::abs(gap) < opts.slope_tie ? fwd.tip.x() >= bwd.tip.x() : gap > 0.0;
    m.tip = pick_fwd ? fwd : bwd;
    m.other = pick_fwd ? bwd : fwd;
    m.conic_angle = m.tip.angle;
    m.angle = m.conic_angle;
    if (opts.tip_window > 0.0) {
        double radius = std::max(8.0, opts.tip_window * (fwd.arc + bwd.arc));
        int dir = pick_fwd ? 1 : -1;
        m.angle = refine_tip_angle(pts, m.tip, conic_curvature(m.fit, m.tip, dir), radius);
    }
    return m;
}

double tip_angle_from_image(const BinaryImage& img, double threshold) {
    VisionOptions o;
    o.threshold = threshold;
    return measure_tip(img, o).angle;
}

// ---------------------------------------------------------------------------
// Rasterizer and image I/O

BinaryImage rasterize(const elastica::Shape& shape, const RasterOptions& opts) {
    if (!(opts.pitch > 0.0)) throw DomainError("pixel pitch must be positive");
    if (opts.stroke < 1) throw DomainError("stroke width must be at least one pixel");
    const double L = shape.length;
    const int samples = static_cast<int>(std::ceil(L / opts.pitch / 0.25)) + 1;
    std::vector<Vec2> body(samples);
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    for (int i = 0; i < samples; ++i) {
        Vec3 p = elastica::body_point(shape, L * i / (samples - 1), {});
        body[i] = {p.x() / opts.pitch, p.y() / opts.pitch};
        xmin = std::min(xmin, body[i].x());
        xmax = std::max(xmax, body[i].x());
        ymin = std::min(ymin, body[i].y());
        ymax = std::max(ymax, body[i].y());
    }
    const double r = 0.5 * opts.stroke;
    int w = opts.width, h = opts.height;
    double u0, v0;
    if (w <= 0 || h <= 0) {
        w = static_cast<int>(std::ceil(xmax - xmin + 2 * r)) + 2 * opts.margin + 1;
        h = static_cast<int>(std::ceil(ymax - ymin + 2 * r)) + 2 * opts.margin + 1;
        u0 = opts.margin + r - xmin;
        v0 = opts.margin + r + ymax;
    } else {
        u0 = opts.margin + r;
        v0 = std::floor(h / 2.0);
    }
    BinaryImage img(w, h, opts.pitch);
    for (const auto& b : body) {
        double cu = u0 + b.x(), cv = v0 - b.y();
        if (cu - r < 0 || cv - r < 0 || cu + r > w - 1 || cv + r > h - 1)
            throw DomainError("image too small for the shape at this pitch");
        for (int y = static_cast<int>(std::floor(cv - r)); y <= static_cast<int>(std::ceil(cv + r)); ++y)
            for (int x = static_cast<int>(std::floor(cu - r)); x <= static_cast<int>(std::ceil(cu + r)); ++x)
                if ((x - cu) * (x - cu) + (y - cv) * (y - cv) <= r * r) img.set(x, y);
    }
    return img;
}

namespace {

std::string next_token(std::istream& in) {
    std::string tok;
    char ch;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

int parse_dim(const std::string& tok, const std::filesystem::path& path) {
    try {
        int v = std::stoi(tok);
        if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw Error(path.string() + ": bad image header");
}

}  // namespace

BinaryImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string magic = next_token(in);
    if (magic != "P5" && magic != "P4") throw Error(path.string() + ": only P5 and P4 images are supported");
    int w = parse_dim(next_token(in), path);
    int h = parse_dim(next_token(in), path);
    BinaryImage img(w, h);
    if (magic == "P5") {
        int maxval = parse_dim(next_token(in), path);
        if (maxval > 255) throw Error(path.string() + ": 16-bit PGM is not supported");
        std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
        in.read(reinterpret_cast<char*>(buf.data()), buf.size());
        if (in.gcount() != static_cast<std::streamsize>(buf.size()))
            throw Error(path.string() + ": truncated pixel data");
        const int cut = maxval == 255 ? 128 : (maxval + 1) / 2;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (buf[static_cast<std::size_t>(y) * w + x] >= cut) img.set(x, y);
    } else {
        const int stride = (w + 7) / 8;
        std::vector<unsigned char> buf(static_cast<std::size_t>(stride) * h);
        in.read(reinterpret_cast<char*>(buf.data()), buf.size());
        if (in.gcount() != static_cast<std::streamsize>(buf.size()))
            throw Error(path.string() + ": truncated pixel data");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (buf[static_cast<std::size_t>(y) * stride + x / 8] & (0x80 >> (x % 8))) img.set(x, y);
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const BinaryImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> row(img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) row[x] = img.at(x, y) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

}  // namespace mscr::vision
