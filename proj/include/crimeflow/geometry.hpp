#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace crimeflow::geo {

/// (lon, lat) in degrees, or plain planar coordinates for synthetic cities.
struct Point {
    double x = 0;
    double y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Closed ring: first vertex equals last.
using Ring = std::vector<Point>;

struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;
};

/// A tract boundary: one or more polygons (GeoJSON Polygon or MultiPolygon).
struct MultiPolygon {
    std::vector<Polygon> parts;
};

struct BBox {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();

    void extend(const Point& p) {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    bool contains(const Point& p, double eps = 0) const {
        return p.x >= min_x - eps && p.x <= max_x + eps && p.y >= min_y - eps && p.y <= max_y + eps;
    }
    bool intersects(const BBox& o, double eps = 0) const {
        return !(o.min_x > max_x + eps || o.max_x < min_x - eps || o.min_y > max_y + eps || o.max_y < min_y - eps);
    }
};

/// Absolute tolerance for boundary tests.
inline constexpr double kEps = 1e-9;

inline bool is_closed(const Ring& r) { return r.size() >= 4 && r.front() == r.back(); }

/// Shoelace signed area (positive for counter-clockwise rings).
inline double signed_area(const Ring& r) {
    double a = 0;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) a += r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
    return a / 2;
}

inline double area(const Polygon& p) {
    double a = std::abs(signed_area(p.exterior));
    for (const auto& h : p.holes) a -= std::abs(signed_area(h));
    return a;
}

inline double area(const MultiPolygon& m) {
    double a = 0;
    for (const auto& p : m.parts) a += area(p);
    return a;
}

inline BBox bbox(const MultiPolygon& m) {
    BBox b;
    for (const auto& p : m.parts)
        for (const auto& v : p.exterior) b.extend(v);
    return b;
}

namespace detail {

/// Returns (A, Cx*A, Cy*A) of a ring with orientation normalised to `sign`.
inline void accumulate_centroid(const Ring& r, double sign, double& a, double& cx, double& cy) {
    double ra = 0, rx = 0, ry = 0;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        double cross = r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
        ra += cross;
        rx += (r[i].x + r[i + 1].x) * cross;
        ry += (r[i].y + r[i + 1].y) * cross;
    }
    double orient = ra < 0 ? -1.0 : 1.0;
    a += sign * orient * ra / 2;
    cx += sign * orient * rx / 6;
    cy += sign * orient * ry / 6;
}

}  // namespace detail

/// Area-weighted centroid over all parts; holes subtract.
inline Point centroid(const MultiPolygon& m) {
    double a = 0, cx = 0, cy = 0;
    for (const auto& p : m.parts) {
        detail::accumulate_centroid(p.exterior, 1.0, a, cx, cy);
        for (const auto& h : p.holes) detail::accumulate_centroid(h, -1.0, a, cx, cy);
    }
    if (a == 0) return {};
    return {cx / a, cy / a};
}

inline double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const Point& p, const Point& a, const Point& b, double eps = kEps) {
    if (p.x < std::min(a.x, b.x) - eps || p.x > std::max(a.x, b.x) + eps || p.y < std::min(a.y, b.y) - eps ||
        p.y > std::max(a.y, b.y) + eps)
        return false;
    double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0) return std::hypot(p.x - a.x, p.y - a.y) <= eps;
    return std::abs(cross(a, b, p)) / len <= eps;
}

/// True when closed segments [a,b] and [c,d] share at least one point.
inline bool segments_touch(const Point& a, const Point& b, const Point& c, const Point& d, double eps = kEps) {
    double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    return on_segment(a, c, d, eps) || on_segment(b, c, d, eps) || on_segment(c, a, b, eps) ||
           on_segment(d, a, b, eps);
}

inline bool on_ring(const Point& p, const Ring& r, double eps = kEps) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
        if (on_segment(p, r[i], r[i + 1], eps)) return true;
    return false;
}

/// Even-odd ray casting; boundary points are not handled here.
inline bool ring_contains(const Ring& r, const Point& p) {
    bool inside = false;
    for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) {
        const Point& a = r[i];
        const Point& b = r[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double xi = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < xi) inside = !inside;
        }
    }
    return inside;
}

/// Point-in-polygon with boundary points counted as inside.
inline bool contains(const MultiPolygon& m, const Point& p, double eps = kEps) {
    for (const auto& part : m.parts) {
        if (on_ring(p, part.exterior, eps)) return true;
        bool on_hole_edge = false;
        for (const auto& h : part.holes)
            if (on_ring(p, h, eps)) on_hole_edge = true;
        if (on_hole_edge) return true;
        if (!ring_contains(part.exterior, p)) continue;
        bool in_hole = false;
        for (const auto& h : part.holes)
            if (ring_contains(h, p)) in_hole = true;
        if (!in_hole) return true;
    }
    return false;
}

namespace detail {

template <class F>
void for_each_ring(const MultiPolygon& m, F&& f) {
    for (const auto& part : m.parts) {
        f(part.exterior);
        for (const auto& h : part.holes) f(h);
    }
}

}  // namespace detail

/// Queen contiguity: the two boundaries share at least one point (a vertex or
/// any point along an edge).
inline bool boundaries_touch(const MultiPolygon& a, const MultiPolygon& b, double eps = kEps) {
    if (!bbox(a).intersects(bbox(b), eps)) return false;
    bool touch = false;
    detail::for_each_ring(a, [&](const Ring& ra) {
        if (touch) return;
        detail::for_each_ring(b, [&](const Ring& rb) {
            if (touch) return;
            for (std::size_t i = 0; i + 1 < ra.size() && !touch; ++i) {
                BBox sa;
                sa.extend(ra[i]);
                sa.extend(ra[i + 1]);
                for (std::size_t j = 0; j + 1 < rb.size(); ++j) {
                    BBox sb;
                    sb.extend(rb[j]);
                    sb.extend(rb[j + 1]);
                    if (!sa.intersects(sb, eps)) continue;
                    if (segments_touch(ra[i], ra[i + 1], rb[j], rb[j + 1], eps)) {
                        touch = true;
                        break;
                    }
                }
            }
        });
    });
    return touch;
}

/// Axis-aligned rectangle as a closed counter-clockwise ring.
inline MultiPolygon rectangle(double x0, double y0, double x1, double y1) {
    return MultiPolygon{{Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}, {}}}};
}

}  // namespace crimeflow::geo
