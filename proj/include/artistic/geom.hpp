#pragma once

// Hierarchy flattening: composed affine transforms, path-to-polygon expansion,
// and the occupancy grid that marks cells too close to existing geometry.

#include <cmath>
#include <functional>
#include <set>
#include <unordered_map>

#include "artistic/gds.hpp"

namespace artistic::geom {

using gds::GdsARef;
using gds::GdsBoundary;
using gds::GdsLibrary;
using gds::GdsPath;
using gds::GdsSRef;
using gds::GdsStructure;
using gds::GdsTransform;
using gds::LayerKey;

struct GeomError : Error {
    using Error::Error;
};

// Row-major 2x3: x' = a·x + b·y + e ; y' = c·x + d·y + f.
struct AffineD {
    double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;

    DVec2 apply(DVec2 p) const { return {a * p.x + b * p.y + e, c * p.x + d * p.y + f}; }
    DVec2 apply(Vec2 p) const { return apply(DVec2{double(p.x), double(p.y)}); }

    // this ∘ o: o first, then this.
    AffineD compose(const AffineD& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d,
                a * o.e + b * o.f + e, c * o.e + d * o.f + f};
    }
};

namespace detail {

// Exact values for right-angle multiples so rigid transforms stay integral.
inline void sincos_deg(double deg, double& s, double& c) {
    double r = std::fmod(deg, 360.0);
    if (r < 0) r += 360.0;
    if (r == 0.0) { s = 0; c = 1; return; }
    if (r == 90.0) { s = 1; c = 0; return; }
    if (r == 180.0) { s = 0; c = -1; return; }
    if (r == 270.0) { s = -1; c = 0; return; }
    double rad = r * (std::acos(-1.0) / 180.0);
    s = std::sin(rad);
    c = std::cos(rad);
}

}  // namespace detail

// Order: reflect about x-axis → magnify → rotate CCW → translate.
inline AffineD to_affine(const GdsTransform& t) {
    double s, c;
    detail::sincos_deg(t.angle_deg, s, c);
    double m = t.magnification;
    double ry = t.reflect_x ? -1.0 : 1.0;
    return {m * c, -m * s * ry, m * s, m * c * ry, double(t.translate.x), double(t.translate.y)};
}

inline Vec2 round_point(DVec2 p) { return {round_away(p.x), round_away(p.y)}; }

inline Vec2 apply_transform(Vec2 p, const GdsTransform& t) {
    return round_point(to_affine(t).apply(p));
}

struct FlatPolygon {
    LayerKey layer;
    std::vector<Vec2> vertices;  // >= 3, implicitly closed
    Rect64 bbox;

    void compute_bbox() {
        bbox = Rect64{};
        for (auto v : vertices) bbox.grow(v);
    }
    friend bool operator==(const FlatPolygon&, const FlatPolygon&) = default;
};

inline double signed_area2(std::span<const Vec2> pts) {
    double acc = 0;
    for (std::size_t i = 0, n = pts.size(); i < n; ++i) {
        Vec2 p = pts[i], q = pts[(i + 1) % n];
        acc += double(p.x) * double(q.y) - double(q.x) * double(p.y);
    }
    return acc;  // twice the signed area
}

// ---------------------------------------------------------------------------
// Path expansion (in local double coordinates; caller transforms and rounds)

namespace detail {

inline DVec2 dnorm(DVec2 v) {
    double len = std::hypot(v.x, v.y);
    return {v.x / len, v.y / len};
}
inline DVec2 left_normal(DVec2 d) { return {-d.y, d.x}; }
inline DVec2 rot(DVec2 v, double s, double c) { return {c * v.x - s * v.y, s * v.x + c * v.y}; }

// One side of the expanded path: offset points from pts.front() to pts.back().
// Joints mitered; miter distance capped at `width` (beveled beyond).
inline void offset_side(std::span<const DVec2> pts, double h, double width,
                        std::vector<DVec2>& out) {
    std::size_t n = pts.size();
    std::vector<DVec2> dirs(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) dirs[i] = dnorm({pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y});

    out.push_back({pts[0].x + h * left_normal(dirs[0]).x, pts[0].y + h * left_normal(dirs[0]).y});
    for (std::size_t i = 1; i + 1 < n; ++i) {
        DVec2 n1 = left_normal(dirs[i - 1]), n2 = left_normal(dirs[i]);
        double cross = dirs[i - 1].x * dirs[i].y - dirs[i - 1].y * dirs[i].x;
        DVec2 a{pts[i].x + h * n1.x, pts[i].y + h * n1.y};
        DVec2 b{pts[i].x + h * n2.x, pts[i].y + h * n2.y};
        if (std::abs(cross) < 1e-12) {  // collinear continuation
            out.push_back(a);
            continue;
        }
        // Intersect line a + t·d1 with line b + u·d2.
        double t = ((b.x - a.x) * dirs[i].y - (b.y - a.y) * dirs[i].x) / cross;
        DVec2 m{a.x + t * dirs[i - 1].x, a.y + t * dirs[i - 1].y};
        double miter = std::hypot(m.x - pts[i].x, m.y - pts[i].y);
        if (miter <= width) {
            out.push_back(m);
        } else {
            out.push_back(a);
            out.push_back(b);
        }
    }
    DVec2 nl = left_normal(dirs[n - 2]);
    out.push_back({pts[n - 1].x + h * nl.x, pts[n - 1].y + h * nl.y});
}

// Semicircular cap at `center` sweeping clockwise from +h·n to -h·n through
// the forward direction; interior points only (7 of a regular 16-gon).
inline void round_cap(DVec2 center, DVec2 n, double h, std::vector<DVec2>& out) {
    constexpr int kSegments = 8;
    for (int k = 1; k < kSegments; ++k) {
        double ang = -k * (std::acos(-1.0) / kSegments);  // clockwise
        DVec2 r = rot(n, std::sin(ang), std::cos(ang));
        out.push_back({center.x + h * r.x, center.y + h * r.y});
    }
}

}  // namespace detail

/// Expands a path to its outline polygon in local (untransformed) double
/// coordinates. Returns empty when all segments are degenerate.
inline std::vector<DVec2> path_outline(const GdsPath& path) {
    std::vector<DVec2> pts;
    pts.reserve(path.points.size());
    for (auto p : path.points) {
        DVec2 d{double(p.x), double(p.y)};
        if (!pts.empty() && pts.back().x == d.x && pts.back().y == d.y) continue;  // skip zero-length
        pts.push_back(d);
    }
    if (pts.size() < 2 || path.width <= 0) return {};

    double h = double(path.width) / 2.0;
    DVec2 d0 = detail::dnorm({pts[1].x - pts[0].x, pts[1].y - pts[0].y});
    std::size_t n = pts.size();
    DVec2 dn = detail::dnorm({pts[n - 1].x - pts[n - 2].x, pts[n - 1].y - pts[n - 2].y});
    if (path.pathtype == 2) {  // square ends extended by half width
        pts[0] = {pts[0].x - h * d0.x, pts[0].y - h * d0.y};
        pts[n - 1] = {pts[n - 1].x + h * dn.x, pts[n - 1].y + h * dn.y};
    }

    std::vector<DVec2> out;
    detail::offset_side(pts, h, double(path.width), out);
    if (path.pathtype == 1) detail::round_cap(pts[n - 1], detail::left_normal(dn), h, out);
    std::vector<DVec2> rev(pts.rbegin(), pts.rend());
    detail::offset_side(rev, h, double(path.width), out);
    if (path.pathtype == 1) {
        DVec2 back_n = detail::left_normal(DVec2{-d0.x, -d0.y});
        detail::round_cap(pts[0], back_n, h, out);
    }
    return out;
}

/// Convenience: expanded path with identity transform, rounded to dbu.
inline std::vector<FlatPolygon> path_to_polygon(const GdsPath& path) {
    auto outline = path_outline(path);
    if (outline.empty()) return {};
    FlatPolygon fp;
    fp.layer = path.key();
    fp.vertices.reserve(outline.size());
    for (auto p : outline) fp.vertices.push_back(round_point(p));
    fp.compute_bbox();
    return {std::move(fp)};
}

// ---------------------------------------------------------------------------
// Flatten

/// Depth-first flatten of `top`, invoking `emit` once per instantiated
/// polygon. `key` filters to one layer/datatype; nullopt emits everything.
inline void flatten_each(const GdsLibrary& lib, const std::string& top,
                         std::optional<LayerKey> key,
                         const std::function<void(FlatPolygon&&)>& emit) {
    const GdsStructure* root = lib.find(top);
    if (!root) throw GeomError("dangling reference: no structure named " + top);

    std::unordered_map<std::string, const GdsStructure*> by_name;
    for (const auto& s : lib.structures) by_name.emplace(s.name, &s);

    std::set<const GdsStructure*> on_stack;

    std::function<void(const GdsStructure*, const AffineD&)> visit =
        [&](const GdsStructure* s, const AffineD& acc) {
            if (!on_stack.insert(s).second)
                throw GeomError("reference cycle involving structure " + s->name);
            for (const auto& el : s->elements) {
                if (const auto* b = std::get_if<GdsBoundary>(&el)) {
                    if (key && b->key() != *key) continue;
                    FlatPolygon fp;
                    fp.layer = b->key();
                    fp.vertices.reserve(b->points.size());
                    for (auto p : b->points) fp.vertices.push_back(round_point(acc.apply(p)));
                    fp.compute_bbox();
                    emit(std::move(fp));
                } else if (const auto* p = std::get_if<GdsPath>(&el)) {
                    if (key && p->key() != *key) continue;
                    auto outline = path_outline(*p);
                    if (outline.empty()) continue;
                    FlatPolygon fp;
                    fp.layer = p->key();
                    fp.vertices.reserve(outline.size());
                    for (auto q : outline) fp.vertices.push_back(round_point(acc.apply(q)));
                    fp.compute_bbox();
                    emit(std::move(fp));
                } else if (const auto* r = std::get_if<GdsSRef>(&el)) {
                    auto it = by_name.find(r->target);
                    if (it == by_name.end())
                        throw GeomError("dangling reference: no structure named " + r->target);
                    visit(it->second, acc.compose(to_affine(r->transform)));
                } else if (const auto* a = std::get_if<GdsARef>(&el)) {
                    auto it = by_name.find(a->target);
                    if (it == by_name.end())
                        throw GeomError("dangling reference: no structure named " + a->target);
                    AffineD base = to_affine(a->transform);
                    for (int row = 0; row < a->rows; ++row)
                        for (int col = 0; col < a->cols; ++col) {
                            AffineD inst = base;
                            inst.e += double(col) * double(a->col_step.x) + double(row) * double(a->row_step.x);
                            inst.f += double(col) * double(a->col_step.y) + double(row) * double(a->row_step.y);
                            visit(it->second, acc.compose(inst));
                        }
                }
                // opaque TEXT/NODE/BOX: no area semantics, not rendered
            }
            on_stack.erase(s);
        };
    visit(root, AffineD{});
}

inline std::vector<FlatPolygon> flatten(const GdsLibrary& lib, const std::string& top,
                                        std::optional<LayerKey> key = std::nullopt) {
    std::vector<FlatPolygon> out;
    flatten_each(lib, top, key, [&](FlatPolygon&& fp) { out.push_back(std::move(fp)); });
    return out;
}

// ---------------------------------------------------------------------------
// Occupancy grid

struct OccupancyGrid {
    Vec2 origin;
    std::int64_t pitch = 1;
    int cols = 0, rows = 0;
    std::vector<std::uint8_t> occupied;  // row-major, one byte per cell

    bool at(int col, int row) const {
        if (col < 0 || row < 0 || col >= cols || row >= rows) return true;  // out of grid = blocked
        return occupied[std::size_t(row) * cols + col] != 0;
    }
    void mark(int col, int row) {
        if (col < 0 || row < 0 || col >= cols || row >= rows) return;
        occupied[std::size_t(row) * cols + col] = 1;
    }
    Rect64 cell_rect(int col, int row) const {
        Vec2 lo{origin.x + col * pitch, origin.y + row * pitch};
        return {lo, {lo.x + pitch, lo.y + pitch}};
    }
};

/// Marks every cell whose square has positive-area overlap with any polygon
/// bbox expanded by `keepout`. Conservative: may overmark, never undermarks.
inline OccupancyGrid build_occupancy(std::span<const FlatPolygon> polys, Vec2 origin,
                                     std::int64_t pitch, int cols, int rows, std::int64_t keepout) {
    if (pitch <= 0) throw GeomError("occupancy pitch must be positive");
    if (keepout < 0) throw GeomError("occupancy keepout must be non-negative");
    OccupancyGrid g;
    g.origin = origin;
    g.pitch = pitch;
    g.cols = cols;
    g.rows = rows;
    g.occupied.assign(std::size_t(cols) * std::size_t(rows), 0);
    for (const auto& p : polys) {
        Rect64 r = p.bbox.expanded(keepout);
        // candidate cell range, then exact open-interval overlap per cell
        auto floor_div = [](std::int64_t a, std::int64_t b) {
            return (a >= 0) ? a / b : -((-a + b - 1) / b);
        };
        std::int64_t c0 = floor_div(r.lo.x - origin.x, pitch) - 1;
        std::int64_t c1 = floor_div(r.hi.x - origin.x, pitch) + 1;
        std::int64_t r0 = floor_div(r.lo.y - origin.y, pitch) - 1;
        std::int64_t r1 = floor_div(r.hi.y - origin.y, pitch) + 1;
        c0 = std::max<std::int64_t>(c0, 0);
        r0 = std::max<std::int64_t>(r0, 0);
        c1 = std::min<std::int64_t>(c1, cols - 1);
        r1 = std::min<std::int64_t>(r1, rows - 1);
        for (std::int64_t row = r0; row <= r1; ++row)
            for (std::int64_t col = c0; col <= c1; ++col)
                if (r.overlaps_open(g.cell_rect(int(col), int(row)))) g.mark(int(col), int(row));
    }
    return g;
}

}  // namespace artistic::geom
