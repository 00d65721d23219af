#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "error.hpp"

namespace scoreforge {

/// Axis-aligned rectangle in page pixel coordinates. Origin is the top-left
/// corner of the page, x grows rightward and y downward.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }
    double center_x() const { return x + w / 2.0; }
    double center_y() const { return y + h / 2.0; }

    bool valid() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 && h > 0.0;
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BBox& b) {
    return os << "(" << b.x << ", " << b.y << ", " << b.w << ", " << b.h << ")";
}

inline double intersection_area(const BBox& a, const BBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    return iw * ih;
}

inline bool overlaps(const BBox& a, const BBox& b) { return intersection_area(a, b) > 0.0; }

inline bool contains(const BBox& outer, const BBox& inner) {
    return inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() &&
           inner.bottom() <= outer.bottom();
}

/// Integer pixel rectangle, half-open: [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }

    BBox to_bbox() const {
        return {double(x0), double(y0), double(width()), double(height())};
    }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Smallest pixel rectangle covering the box.
inline PixelRect pixel_cover(const BBox& b) {
    return {int(std::floor(b.x)), int(std::floor(b.y)), int(std::ceil(b.right())), int(std::ceil(b.bottom()))};
}

/// 2-D affine map: x' = a*x + b*y + tx, y' = c*x + d*y + ty.
struct AffineTransform {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    double d = 1.0;
    double tx = 0.0;
    double ty = 0.0;

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(double dx, double dy) { return {1.0, 0.0, 0.0, 1.0, dx, dy}; }

    double determinant() const { return a * d - b * c; }

    std::array<double, 2> apply(double x, double y) const {
        return {a * x + b * y + tx, c * x + d * y + ty};
    }

    /// Returns the map that applies `first` and then `*this`.
    AffineTransform after(const AffineTransform& first) const {
        return {a * first.a + b * first.c,
                a * first.b + b * first.d,
                c * first.a + d * first.c,
                c * first.b + d * first.d,
                a * first.tx + b * first.ty + tx,
                c * first.tx + d * first.ty + ty};
    }

    AffineTransform inverse() const {
        const double det = determinant();
        if (!(std::abs(det) > 1e-12) || !std::isfinite(det)) {
            throw Error(ErrorKind::geometry, "singular affine transform");
        }
        const double ia = d / det;
        const double ib = -b / det;
        const double ic = -c / det;
        const double id = a / det;
        return {ia, ib, ic, id, -(ia * tx + ib * ty), -(ic * tx + id * ty)};
    }
};

/// Axis-aligned hull of the four transformed corners.
inline BBox transform_bbox(const BBox& box, const AffineTransform& t) {
    const double det = t.determinant();
    if (!(std::abs(det) > 1e-12) || !std::isfinite(det)) {
        throw Error(ErrorKind::geometry, "singular affine transform");
    }
    const std::array<std::array<double, 2>, 4> corners = {
        t.apply(box.x, box.y), t.apply(box.right(), box.y), t.apply(box.x, box.bottom()),
        t.apply(box.right(), box.bottom())};
    double x0 = corners[0][0], x1 = corners[0][0], y0 = corners[0][1], y1 = corners[0][1];
    for (const auto& p : corners) {
        x0 = std::min(x0, p[0]);
        x1 = std::max(x1, p[0]);
        y0 = std::min(y0, p[1]);
        y1 = std::max(y1, p[1]);
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

} // namespace scoreforge
