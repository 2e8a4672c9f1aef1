#pragma once

// Logo-to-metal art: threshold a bitmap, map it onto a pitch grid, tile the
// ink with polyominoes (greedy, deterministic), thin to the density budget,
// and emit DRC-clean polygons plus an independent rule checker.

#include <algorithm>
#include <cstdio>

#include "artistic/geom.hpp"
#include "artistic/png.hpp"

namespace artistic::meerkat {

using geom::FlatPolygon;
using geom::OccupancyGrid;
using gds::GdsLibrary;
using gds::GdsUnits;
using gds::LayerKey;

struct ArtRules {
    std::int64_t cell_size = 1000;  // drawn square side, dbu
    std::int64_t gap = 500;         // gutter between pitch cells, dbu
    int min_cells = 1;              // smallest allowed polyomino
    int max_cells = 4;
    std::int64_t keepout = 0;  // occupancy expansion around existing metal
    int density_window = 16;   // window edge, in grid cells
    double max_density = 1.0;  // drawn area / window area upper bound
    std::uint64_t seed = 1;

    // Foundry rule proxies the art must satisfy (user-supplied, not a deck).
    std::int64_t min_width_proxy = 0;
    std::int64_t min_spacing_proxy = 0;
    std::int64_t max_width_proxy = INT64_MAX;

    std::int64_t pitch() const { return cell_size + gap; }

    void validate() const {
        if (cell_size <= 0) throw ConfigError("cell_size must be positive");
        if (gap <= 0) throw ConfigError("gap must be positive");
        if (min_cells < 1 || max_cells > 4 || min_cells > max_cells)
            throw ConfigError("cell count bounds must satisfy 1 <= min_cells <= max_cells <= 4");
        if (keepout < 0) throw ConfigError("keepout must be non-negative");
        if (density_window < 1) throw ConfigError("density_window must be at least 1");
        if (!(max_density > 0.0) || max_density > 1.0)
            throw ConfigError("max_density must be in (0, 1]");
        if (cell_size < min_width_proxy)
            throw ConfigError("cell_size below the minimum width rule");
        if (gap < min_spacing_proxy) throw ConfigError("gap below the minimum spacing rule");
        if (2 * cell_size + gap > max_width_proxy)
            throw ConfigError("2*cell_size + gap exceeds the maximum width rule");
    }
};

struct BitMatrix {
    int cols = 0, rows = 0;
    std::vector<std::uint8_t> bits;  // row-major; row 0 = image top

    bool at(int col, int row) const { return bits[std::size_t(row) * cols + col] != 0; }
    void set(int col, int row, bool v) { bits[std::size_t(row) * cols + col] = v ? 1 : 0; }
};

struct InkGrid {
    int cols = 0, rows = 0;
    std::vector<std::uint8_t> ink;  // row-major; row 0 = placement bottom
    Rect64 placement;               // dbu rectangle on chip

    bool at(int col, int row) const { return ink[std::size_t(row) * cols + col] != 0; }
    void set(int col, int row, bool v) { ink[std::size_t(row) * cols + col] = v ? 1 : 0; }
};

struct ArtPolyomino {
    std::vector<Vec2> cells;  // (col,row) grid coordinates, edge-connected
    FlatPolygon polygon;
};

// ---------------------------------------------------------------------------
// Image thresholding and grid mapping

/// Ink = Rec.709 luma below threshold, alpha-composited against white first.
/// Evaluated in exact integer arithmetic: scale luma by 10000·255.
inline BitMatrix image_to_bw(const png::PngImage& img, int threshold) {
    if (img.width == 0 || img.height == 0) throw ConfigError("empty logo image");
    BitMatrix bw;
    bw.cols = int(img.width);
    bw.rows = int(img.height);
    bw.bits.resize(std::size_t(bw.cols) * bw.rows);
    for (std::uint32_t y = 0; y < img.height; ++y)
        for (std::uint32_t x = 0; x < img.width; ++x) {
            const std::uint8_t* p = img.px(x, y);
            std::int64_t a = p[3];
            auto over_white = [&](std::int64_t c) { return c * a + 255 * (255 - a); };  // ×255
            std::int64_t luma = 2126 * over_white(p[0]) + 7152 * over_white(p[1]) +
                                722 * over_white(p[2]);  // ×10000×255
            bw.set(int(x), int(y), luma < std::int64_t(threshold) * 10000 * 255);
        }
    return bw;
}

/// Grid dims = floor(placement extent / pitch); a grid cell is ink iff the
/// majority of the source pixels mapped into it are ink (ties → ink).
/// Grid row 0 is the placement bottom; image row 0 is the top.
inline InkGrid map_logo_to_grid(const BitMatrix& bw, Rect64 placement, const ArtRules& rules) {
    rules.validate();
    if (!placement.valid()) throw ConfigError("invalid placement rectangle");
    double place_aspect = double(placement.width()) / double(placement.height());
    double bw_aspect = double(bw.cols) / double(bw.rows);
    if (std::abs(place_aspect - bw_aspect) > 0.01 * bw_aspect)
        throw ConfigError("placement aspect differs from logo aspect by more than 1%");

    std::int64_t pitch = rules.pitch();
    InkGrid grid;
    grid.cols = int(placement.width() / pitch);
    grid.rows = int(placement.height() / pitch);
    grid.placement = placement;
    if (grid.cols < 2 || grid.rows < 2)
        throw ConfigError("placement too small: ink grid below 2x2 cells");
    grid.ink.assign(std::size_t(grid.cols) * grid.rows, 0);

    // Source pixel blocks: pixel px belongs to grid column floor(px·cols/bw.cols).
    for (int gr = 0; gr < grid.rows; ++gr) {
        // image rows for this grid row (grid row 0 = bottom = image bottom rows)
        int ir = grid.rows - 1 - gr;
        std::int64_t y0 = std::int64_t(ir) * bw.rows / grid.rows;
        std::int64_t y1 = std::int64_t(ir + 1) * bw.rows / grid.rows;
        for (int gc = 0; gc < grid.cols; ++gc) {
            std::int64_t x0 = std::int64_t(gc) * bw.cols / grid.cols;
            std::int64_t x1 = std::int64_t(gc + 1) * bw.cols / grid.cols;
            std::int64_t ink_n = 0, total = 0;
            for (std::int64_t y = y0; y < y1; ++y)
                for (std::int64_t x = x0; x < x1; ++x) {
                    ink_n += bw.at(int(x), int(y)) ? 1 : 0;
                    ++total;
                }
            grid.set(gc, gr, total > 0 && 2 * ink_n >= total);  // ties → ink
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Polyomino tables

namespace detail {

struct Piece {
    const char* name;
    std::vector<std::vector<Vec2>> orientations;  // cells as (col,row), raster-first at (0,0)
};

// Rotate CCW and renormalize so the raster-order-first cell sits at (0,0):
// all other cells then come later in (row, col) scan order.
inline std::vector<Vec2> normalize_cells(std::vector<Vec2> cells) {
    auto raster_less = [](Vec2 a, Vec2 b) { return std::pair(a.y, a.x) < std::pair(b.y, b.x); };
    Vec2 base = *std::min_element(cells.begin(), cells.end(), raster_less);
    for (auto& c : cells) c = c - base;
    std::sort(cells.begin(), cells.end(), raster_less);
    return cells;
}

inline std::vector<std::vector<Vec2>> make_orientations(std::vector<Vec2> base) {
    std::vector<std::vector<Vec2>> out;
    std::vector<Vec2> cur = std::move(base);
    for (int k = 0; k < 4; ++k) {
        auto norm = normalize_cells(cur);
        if (std::find(out.begin(), out.end(), norm) == out.end()) out.push_back(norm);
        for (auto& c : cur) c = Vec2{-c.y, c.x};  // CCW: (col,row) -> (-row,col)
    }
    return out;
}

// Fixed preference order; greedy placement tries these first to last.
inline const std::vector<Piece>& piece_table() {
    static const std::vector<Piece> table = [] {
        std::vector<Piece> t;
        auto add = [&](const char* name, std::vector<Vec2> cells) {
            t.push_back({name, make_orientations(std::move(cells))});
        };
        // cells given as (col,row)
        add("O", {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
        add("I", {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
        add("L", {{0, 0}, {1, 0}, {0, 1}, {0, 2}});
        add("J", {{0, 0}, {1, 0}, {1, 1}, {1, 2}});
        add("T", {{0, 0}, {1, 0}, {2, 0}, {1, 1}});
        add("S", {{1, 0}, {2, 0}, {0, 1}, {1, 1}});
        add("Z", {{0, 0}, {1, 0}, {1, 1}, {2, 1}});
        add("I3", {{0, 0}, {1, 0}, {2, 0}});
        add("L3", {{0, 0}, {1, 0}, {0, 1}});
        add("D2", {{0, 0}, {1, 0}});
        add("M1", {{0, 0}});
        return t;
    }();
    return table;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shape polygon construction (squares + bridges + filled 2x2 corners)

namespace detail {

// Outline of the drawn region for one shape, as a CCW rectilinear polygon.
// The region: a cell_size square per cell, a bridge across the gutter for
// each edge-adjacent member pair, and the gutter corner filled when all four
// cells of a 2x2 block belong to the shape (so O becomes one solid square).
inline std::vector<Vec2> trace_shape_outline(const std::vector<Vec2>& cells, Rect64 placement,
                                             const ArtRules& rules) {
    std::int64_t cs = rules.cell_size, pitch = rules.pitch();
    auto cell_xy = [&](Vec2 c) {
        return Vec2{placement.lo.x + c.x * pitch, placement.lo.y + c.y * pitch};
    };
    auto member = [&](Vec2 c) {
        return std::find(cells.begin(), cells.end(), c) != cells.end();
    };

    std::vector<Rect64> rects;
    for (auto c : cells) {
        Vec2 o = cell_xy(c);
        rects.push_back({{o.x, o.y}, {o.x + cs, o.y + cs}});
        if (member({c.x + 1, c.y}))
            rects.push_back({{o.x + cs, o.y}, {o.x + pitch, o.y + cs}});
        if (member({c.x, c.y + 1}))
            rects.push_back({{o.x, o.y + cs}, {o.x + cs, o.y + pitch}});
        if (member({c.x + 1, c.y}) && member({c.x, c.y + 1}) && member({c.x + 1, c.y + 1}))
            rects.push_back({{o.x + cs, o.y + cs}, {o.x + pitch, o.y + pitch}});
    }

    // coordinate compression
    std::vector<std::int64_t> xs, ys;
    for (auto& r : rects) {
        xs.push_back(r.lo.x);
        xs.push_back(r.hi.x);
        ys.push_back(r.lo.y);
        ys.push_back(r.hi.y);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    int nx = int(xs.size()) - 1, ny = int(ys.size()) - 1;

    auto xi = [&](std::int64_t x) {
        return int(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
    };
    auto yi = [&](std::int64_t y) {
        return int(std::lower_bound(ys.begin(), ys.end(), y) - ys.begin());
    };
    std::vector<std::uint8_t> filled(std::size_t(nx) * ny, 0);
    auto fget = [&](int i, int j) {
        return i >= 0 && j >= 0 && i < nx && j < ny && filled[std::size_t(j) * nx + i] != 0;
    };
    for (auto& r : rects)
        for (int j = yi(r.lo.y); j < yi(r.hi.y); ++j)
            for (int i = xi(r.lo.x); i < xi(r.hi.x); ++i) filled[std::size_t(j) * nx + i] = 1;

    // start at the bottom-left corner of the raster-first filled cell
    int si = -1, sj = -1;
    for (int j = 0; j < ny && si < 0; ++j)
        for (int i = 0; i < nx; ++i)
            if (fget(i, j)) {
                si = i;
                sj = j;
                break;
            }

    // walk the boundary with the filled region on the left (CCW), collecting
    // direction changes as vertices; directions: 0=+x 1=+y 2=-x 3=-y
    std::vector<Vec2> verts;
    int ci = si, cj = sj, dir = 0;
    do {
        // cells just beyond the lattice point (ci,cj) in direction dir,
        // on the left and right of the outgoing ray
        int li, lj, ri, rj;
        switch (dir) {
            case 0: li = ci; lj = cj; ri = ci; rj = cj - 1; break;
            case 1: li = ci - 1; lj = cj; ri = ci; rj = cj; break;
            case 2: li = ci - 1; lj = cj - 1; ri = ci - 1; rj = cj; break;
            default: li = ci; lj = cj - 1; ri = ci - 1; rj = cj - 1; break;
        }
        int ndir;
        if (fget(ri, rj)) ndir = (dir + 3) & 3;       // region ahead-right: turn right
        else if (fget(li, lj)) ndir = dir;            // boundary continues: straight
        else ndir = (dir + 1) & 3;                    // region fell away: turn left
        if (ndir != dir) {
            verts.push_back({xs[ci], ys[cj]});
            dir = ndir;
            continue;  // re-evaluate at same point with new direction
        }
        switch (dir) {
            case 0: ++ci; break;
            case 1: ++cj; break;
            case 2: --ci; break;
            default: --cj; break;
        }
    } while (!(ci == si && cj == sj && dir == 0) && verts.size() < 10000);
    return verts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Density accounting (shared by the generator and the checker's oracle side)

namespace detail {

// Drawn area attributed to each pitch cell: the square, plus the gutter
// bridges toward the right/up neighbors, plus the 2x2 corner fill. All of it
// lies inside the cell's own pitch rectangle, so pitch-aligned window sums
// over these attributions equal exact geometric intersection areas.
struct DensityField {
    int cols = 0, rows = 0;
    std::vector<std::int64_t> area;  // per cell

    std::int64_t& at(int c, int r) { return area[std::size_t(r) * cols + c]; }
    std::int64_t get(int c, int r) const { return area[std::size_t(r) * cols + c]; }
};

inline void add_shape_area(DensityField& f, const std::vector<Vec2>& cells, const ArtRules& rules,
                           std::int64_t sign) {
    std::int64_t cs = rules.cell_size, g = rules.gap;
    auto member = [&](Vec2 c) { return std::find(cells.begin(), cells.end(), c) != cells.end(); };
    for (auto c : cells) {
        std::int64_t a = cs * cs;
        bool right = member({c.x + 1, c.y}), up = member({c.x, c.y + 1});
        if (right) a += g * cs;
        if (up) a += g * cs;
        if (right && up && member({c.x + 1, c.y + 1})) a += g * g;
        f.at(int(c.x), int(c.y)) += sign * a;
    }
}

struct WindowSpan {
    int c0, r0, w, h;  // in grid cells
};

// Sliding fully-contained windows; a grid smaller than the window yields one
// clamped window covering everything.
inline std::vector<WindowSpan> density_windows(int cols, int rows, int w) {
    std::vector<WindowSpan> out;
    int we = std::min(w, cols), he = std::min(w, rows);
    for (int r = 0; r + he <= rows; ++r)
        for (int c = 0; c + we <= cols; ++c) out.push_back({c, r, we, he});
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generation

/// Greedy raster-scan tiling with fixed piece preference, then seeded
/// thinning until every density window complies. Deterministic.
inline std::vector<ArtPolyomino> generate_art(const InkGrid& grid, const OccupancyGrid& occ,
                                              const ArtRules& rules) {
    rules.validate();
    if (occ.pitch != rules.pitch() || occ.origin != grid.placement.lo || occ.cols < grid.cols ||
        occ.rows < grid.rows)
        throw Error("occupancy grid does not cover the placement at the art pitch");

    const int cols = grid.cols, rows = grid.rows;
    std::vector<std::uint8_t> free_cell(std::size_t(cols) * rows, 0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            free_cell[std::size_t(r) * cols + c] = grid.at(c, r) && !occ.at(c, r) ? 1 : 0;
    auto is_free = [&](std::int64_t c, std::int64_t r) {
        return c >= 0 && r >= 0 && c < cols && r < rows && free_cell[std::size_t(r) * cols + c] != 0;
    };

    std::vector<std::vector<Vec2>> placed;  // cell lists
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (!is_free(c, r)) continue;
            for (const auto& piece : detail::piece_table()) {
                int n = int(piece.orientations.front().size());
                if (n < rules.min_cells || n > rules.max_cells) continue;
                bool done = false;
                for (const auto& cells : piece.orientations) {
                    bool fits = true;
                    for (auto d : cells)
                        if (!is_free(c + d.x, r + d.y)) {
                            fits = false;
                            break;
                        }
                    if (!fits) continue;
                    std::vector<Vec2> abs_cells;
                    for (auto d : cells) {
                        abs_cells.push_back({c + d.x, r + d.y});
                        free_cell[std::size_t(r + d.y) * cols + (c + d.x)] = 0;
                    }
                    placed.push_back(std::move(abs_cells));
                    done = true;
                    break;
                }
                if (done) break;
            }
        }

    // Density thinning: drop whole shapes, seeded order, worst window first.
    detail::DensityField field;
    field.cols = cols;
    field.rows = rows;
    field.area.assign(std::size_t(cols) * rows, 0);
    for (const auto& cells : placed) detail::add_shape_area(field, cells, rules, +1);

    auto windows = detail::density_windows(cols, rows, rules.density_window);
    double pitch = double(rules.pitch());

    std::vector<std::uint8_t> dropped(placed.size(), 0);
    std::vector<std::uint32_t> drop_order(placed.size());
    for (std::uint32_t i = 0; i < drop_order.size(); ++i) drop_order[i] = i;
    SplitMix64 rng{rules.seed};
    for (std::size_t i = drop_order.size(); i > 1; --i)
        std::swap(drop_order[i - 1], drop_order[rng.below(i)]);
    std::vector<std::uint32_t> drop_rank(placed.size());
    for (std::uint32_t pos = 0; pos < drop_order.size(); ++pos) drop_rank[drop_order[pos]] = pos;

    // cell -> shape index for victim lookup
    std::vector<std::int32_t> owner(std::size_t(cols) * rows, -1);
    for (std::uint32_t s = 0; s < placed.size(); ++s)
        for (auto c : placed[s]) owner[std::size_t(c.y) * cols + c.x] = std::int32_t(s);

    auto window_sum = [&](const detail::WindowSpan& w) {
        std::int64_t sum = 0;
        for (int r = w.r0; r < w.r0 + w.h; ++r)
            for (int c = w.c0; c < w.c0 + w.w; ++c) sum += field.get(c, r);
        return sum;
    };

    for (;;) {
        double worst_over = 0.0;
        int worst = -1;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto& w = windows[i];
            double warea = double(w.w) * pitch * double(w.h) * pitch;
            double over = double(window_sum(w)) - rules.max_density * warea;
            if (over > worst_over) {
                worst_over = over;
                worst = int(i);
            }
        }
        if (worst < 0) break;
        const auto& w = windows[std::size_t(worst)];
        std::uint32_t victim = UINT32_MAX;
        for (int r = w.r0; r < w.r0 + w.h; ++r)
            for (int c = w.c0; c < w.c0 + w.w; ++c) {
                std::int32_t s = owner[std::size_t(r) * cols + c];
                if (s >= 0 && !dropped[s] &&
                    (victim == UINT32_MAX || drop_rank[s] < drop_rank[victim]))
                    victim = std::uint32_t(s);
            }
        if (victim == UINT32_MAX) break;  // window over budget with nothing to drop
        dropped[victim] = 1;
        detail::add_shape_area(field, placed[victim], rules, -1);
        for (auto c : placed[victim]) owner[std::size_t(c.y) * cols + c.x] = -1;
    }

    std::vector<ArtPolyomino> out;
    for (std::uint32_t s = 0; s < placed.size(); ++s) {
        if (dropped[s]) continue;
        ArtPolyomino ap;
        ap.cells = placed[s];
        ap.polygon.layer = LayerKey{};
        ap.polygon.vertices = detail::trace_shape_outline(placed[s], grid.placement, rules);
        ap.polygon.compute_bbox();
        out.push_back(std::move(ap));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent DRC checker

struct Violation {
    Rect64 where;
    std::string detail;
};

struct DrcReport {
    std::vector<Violation> spacing, width, occupancy, density;

    std::size_t total() const {
        return spacing.size() + width.size() + occupancy.size() + density.size();
    }
    bool clean() const { return total() == 0; }
};

namespace detail {

// Exact band decomposition of a rectilinear simple polygon into rects.
inline std::vector<Rect64> polygon_to_rects(const std::vector<Vec2>& verts) {
    std::vector<std::int64_t> ys;
    for (auto v : verts) ys.push_back(v.y);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    std::vector<Rect64> rects;
    std::size_t n = verts.size();
    for (std::size_t band = 0; band + 1 < ys.size(); ++band) {
        std::int64_t y0 = ys[band], y1 = ys[band + 1];
        // vertical edges spanning this band, by x
        std::vector<std::int64_t> crossings;
        for (std::size_t i = 0; i < n; ++i) {
            Vec2 a = verts[i], b = verts[(i + 1) % n];
            if (a.x != b.x) continue;
            std::int64_t lo = std::min(a.y, b.y), hi = std::max(a.y, b.y);
            if (lo <= y0 && y1 <= hi) crossings.push_back(a.x);
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t i = 0; i + 1 < crossings.size(); i += 2)
            rects.push_back({{crossings[i], y0}, {crossings[i + 1], y1}});
    }
    return rects;
}

// Squared distance between two axis-aligned rectangles (0 when overlapping).
inline std::int64_t rect_dist2(const Rect64& a, const Rect64& b) {
    std::int64_t dx = std::max<std::int64_t>({a.lo.x - b.hi.x, b.lo.x - a.hi.x, 0});
    std::int64_t dy = std::max<std::int64_t>({a.lo.y - b.hi.y, b.lo.y - a.hi.y, 0});
    return dx * dx + dy * dy;
}

inline std::int64_t intersect_area(const Rect64& a, const Rect64& b) {
    std::int64_t w = std::min(a.hi.x, b.hi.x) - std::max(a.lo.x, b.lo.x);
    std::int64_t h = std::min(a.hi.y, b.hi.y) - std::max(a.lo.y, b.lo.y);
    return w > 0 && h > 0 ? w * h : 0;
}

}  // namespace detail

/// Brute-force verifier, independent of the generator's bookkeeping: it works
/// from the emitted polygons (band-decomposed into rects), not the cell lists.
inline DrcReport check_drc(std::span<const ArtPolyomino> shapes, const OccupancyGrid& occ,
                           const ArtRules& rules) {
    DrcReport rep;
    std::vector<std::vector<Rect64>> rects(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i)
        rects[i] = detail::polygon_to_rects(shapes[i].polygon.vertices);

    // spacing: pairwise region distance < gap (bbox-pruned, exact integers)
    std::int64_t g2 = rules.gap * rules.gap;
    for (std::size_t i = 0; i < shapes.size(); ++i)
        for (std::size_t j = i + 1; j < shapes.size(); ++j) {
            if (detail::rect_dist2(shapes[i].polygon.bbox, shapes[j].polygon.bbox) >= g2) continue;
            for (const auto& ra : rects[i])
                for (const auto& rb : rects[j]) {
                    std::int64_t d2 = detail::rect_dist2(ra, rb);
                    if (d2 < g2) {
                        Rect64 at = ra;
                        at.grow(rb);
                        rep.spacing.push_back({at, "shapes " + std::to_string(i) + " and " +
                                                       std::to_string(j) + " closer than gap"});
                        goto next_pair;
                    }
                }
        next_pair:;
        }

    // width: every member cell's drawn square must be fully covered
    std::int64_t cs = rules.cell_size;
    for (std::size_t i = 0; i < shapes.size(); ++i)
        for (auto c : shapes[i].cells) {
            Rect64 sq{{occ.origin.x + c.x * occ.pitch, occ.origin.y + c.y * occ.pitch}, {}};
            sq.hi = {sq.lo.x + cs, sq.lo.y + cs};
            std::int64_t covered = 0;
            for (const auto& r : rects[i]) covered += detail::intersect_area(r, sq);
            if (covered != cs * cs)
                rep.width.push_back({sq, "drawn square of shape " + std::to_string(i) +
                                             " narrower than cell_size"});
        }

    // occupancy: art must not positively overlap any occupied cell
    for (std::size_t i = 0; i < shapes.size(); ++i)
        for (const auto& r : rects[i]) {
            auto floor_div = [](std::int64_t a, std::int64_t b) {
                return (a >= 0) ? a / b : -((-a + b - 1) / b);
            };
            std::int64_t c0 = floor_div(r.lo.x - occ.origin.x, occ.pitch);
            std::int64_t c1 = floor_div(r.hi.x - occ.origin.x - 1, occ.pitch);
            std::int64_t r0 = floor_div(r.lo.y - occ.origin.y, occ.pitch);
            std::int64_t r1 = floor_div(r.hi.y - occ.origin.y - 1, occ.pitch);
            for (std::int64_t rr = r0; rr <= r1; ++rr)
                for (std::int64_t cc = c0; cc <= c1; ++cc)
                    if (cc >= 0 && rr >= 0 && cc < occ.cols && rr < occ.rows &&
                        occ.at(int(cc), int(rr)) && r.overlaps_open(occ.cell_rect(int(cc), int(rr))))
                        rep.occupancy.push_back({r, "art overlaps occupied cell (" +
                                                        std::to_string(cc) + "," + std::to_string(rr) +
                                                        ")"});
        }

    // density: brute-force intersection area per window
    // windows are pitch-aligned over the grid implied by the occupancy origin
    int cols = occ.cols, rows = occ.rows;
    auto windows = detail::density_windows(cols, rows, rules.density_window);
    double pitch = double(rules.pitch());
    for (const auto& w : windows) {
        Rect64 wr{{occ.origin.x + w.c0 * occ.pitch, occ.origin.y + w.r0 * occ.pitch}, {}};
        wr.hi = {wr.lo.x + w.w * occ.pitch, wr.lo.y + w.h * occ.pitch};
        std::int64_t area = 0;
        for (const auto& shape_rects : rects)
            for (const auto& r : shape_rects) area += detail::intersect_area(r, wr);
        double warea = double(w.w) * pitch * double(w.h) * pitch;
        if (double(area) > rules.max_density * warea)
            rep.density.push_back({wr, "window drawn area " + std::to_string(area) +
                                           " exceeds max_density"});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Exports

/// One path per shape, coordinates in µm, y flipped to screen convention,
/// viewBox anchored at the placement rectangle.
inline std::string export_svg(std::span<const ArtPolyomino> shapes, Rect64 placement,
                              const GdsUnits& units) {
    double um = units.um_per_dbu();
    auto fmt = [](double v) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    double w = double(placement.width()) * um, h = double(placement.height()) * um;
    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" + fmt(double(placement.lo.x) * um) +
           " 0 " + fmt(w) + " " + fmt(h) + "\">\n";
    for (const auto& s : shapes) {
        svg += "  <path d=\"";
        for (std::size_t i = 0; i < s.polygon.vertices.size(); ++i) {
            Vec2 v = s.polygon.vertices[i];
            svg += (i == 0 ? "M" : " L");
            svg += fmt(double(v.x) * um) + " " + fmt(double(placement.hi.y - v.y) * um);
        }
        svg += " Z\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

/// Single structure "MEERKAT_ART", one boundary per shape.
inline GdsLibrary export_art_gds(std::span<const ArtPolyomino> shapes, LayerKey layer,
                                 const GdsUnits& units) {
    GdsLibrary lib;
    lib.name = "ARTWORK";
    lib.units = units;
    gds::GdsStructure st;
    st.name = "MEERKAT_ART";
    for (const auto& s : shapes) {
        gds::GdsBoundary b;
        b.layer = layer.layer;
        b.datatype = layer.datatype;
        b.points = s.polygon.vertices;
        st.elements.push_back(std::move(b));
    }
    lib.structures.push_back(std::move(st));
    return lib;
}

}  // namespace artistic::meerkat
