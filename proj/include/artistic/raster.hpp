#pragma once

// Bounded-memory coverage rasterizer. Samples live on one global fixed-point
// lattice (1/512 dbu), so any tiling of the output plane sees exactly the
// same sample decisions: tile seams cannot exist by construction.

#include <map>

#include "artistic/geom.hpp"

namespace artistic::raster {

using geom::FlatPolygon;
using gds::GdsLibrary;
using gds::GdsUnits;
using gds::LayerKey;

struct RasterError : Error {
    using Error::Error;
};

struct RenderFrame {
    Rect64 window;                // dbu rectangle to render
    double nm_per_px = 1000.0;    // final-resolution pixel pitch
    int supersample = 2;          // 1, 2, 4 or 8 samples per pixel edge
    std::int64_t max_tile_px = 250'000'000;
    std::int64_t max_png_px = std::int64_t(1) << 30;  // output splits into parts
};

// All sample coordinates are integers in units of 1/512 dbu ("F units").
// Sample (k, j) sits at x = x0F + (2k+1)·H, y = y1F - (2j+1)·H, counting
// k from the window's left edge and j from its top edge, over the whole
// output plane rather than per tile.
struct SampleLattice {
    std::int64_t x0F = 0, y1F = 0;  // window left/top in F units
    std::int64_t H = 0;             // half the sample pitch in F units
    int s = 1;                      // samples per pixel edge
    std::int64_t out_w = 0, out_h = 0;

    std::int64_t sample_xF(std::int64_t k) const { return x0F + (2 * k + 1) * H; }
    std::int64_t sample_yF(std::int64_t j) const { return y1F - (2 * j + 1) * H; }
};

inline SampleLattice make_lattice(const RenderFrame& frame, const GdsUnits& units) {
    if (!frame.window.valid()) throw RasterError("render window is empty");
    if (!(frame.nm_per_px > 0)) throw RasterError("nm_per_px must be positive");
    int s = frame.supersample;
    if (s != 1 && s != 2 && s != 4 && s != 8)
        throw RasterError("supersample must be 1, 2, 4 or 8");

    SampleLattice lat;
    lat.s = s;
    double step_dbu = frame.nm_per_px / (double(s) * units.nm_per_dbu());
    lat.H = std::llround(step_dbu * 256.0);
    if (lat.H < 1)
        throw RasterError("pixel pitch finer than the 1/512 dbu sample grid");
    double px_w = double(frame.window.width()) * units.nm_per_dbu() / frame.nm_per_px;
    double px_h = double(frame.window.height()) * units.nm_per_dbu() / frame.nm_per_px;
    lat.out_w = std::int64_t(std::ceil(px_w - 1e-9));
    lat.out_h = std::int64_t(std::ceil(px_h - 1e-9));
    if (lat.out_w < 1 || lat.out_h < 1) throw RasterError("render window below one pixel");
    if (lat.out_w * s >= (std::int64_t(1) << 31) || lat.out_h * s >= (std::int64_t(1) << 31))
        throw RasterError("render size exceeds the supported sample index range");
    lat.x0F = frame.window.lo.x * 512;
    lat.y1F = frame.window.hi.y * 512;
    return lat;
}

// ---------------------------------------------------------------------------
// Tiling

struct Tile {
    std::int64_t px0 = 0, py0 = 0;  // output-pixel origin
    std::int64_t w = 0, h = 0;
    std::int64_t col = 0, row = 0;
};

struct TilePlan {
    std::int64_t out_w = 0, out_h = 0;
    std::int64_t tile_w = 0, tile_h = 0;
    std::int64_t cols = 0, rows = 0;

    std::int64_t count() const { return cols * rows; }
    Tile at(std::int64_t col, std::int64_t row) const {
        Tile t;
        t.col = col;
        t.row = row;
        t.px0 = col * tile_w;
        t.py0 = row * tile_h;
        t.w = std::min(tile_w, out_w - t.px0);
        t.h = std::min(tile_h, out_h - t.py0);
        return t;
    }
};

/// One tile when everything fits, else square tiles whose edge is
/// floor(sqrt(max_tile_px)) rounded down to a multiple of 8.
inline TilePlan plan_tiles(std::int64_t out_w, std::int64_t out_h, std::int64_t max_tile_px) {
    if (max_tile_px < 64) throw RasterError("max_tile_px must be at least 64");
    if (out_w < 1 || out_h < 1) throw RasterError("output dimensions must be positive");
    TilePlan plan;
    plan.out_w = out_w;
    plan.out_h = out_h;
    if (out_w * out_h <= max_tile_px) {
        plan.tile_w = out_w;
        plan.tile_h = out_h;
        plan.cols = plan.rows = 1;
        return plan;
    }
    std::int64_t edge = std::int64_t(std::sqrt(double(max_tile_px)));
    while (edge * edge > max_tile_px) --edge;
    edge -= edge % 8;
    plan.tile_w = std::min(out_w, edge);
    plan.tile_h = std::min(out_h, edge);
    plan.cols = (out_w + plan.tile_w - 1) / plan.tile_w;
    plan.rows = (out_h + plan.tile_h - 1) / plan.tile_h;
    return plan;
}

// ---------------------------------------------------------------------------
// Scanline fill

struct CoverageTile {
    std::int64_t px0 = 0, py0 = 0;
    std::int64_t w = 0, h = 0;
    std::vector<std::uint8_t> cov;  // row-major, top-down, w*h bytes

    std::uint8_t at(std::int64_t x, std::int64_t y) const {
        return cov[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    }
};

namespace detail {

using i128 = __int128;

inline std::int64_t floor_div64(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

inline i128 floor_div128(i128 a, i128 b) {
    i128 q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

inline i128 ceil_div128(i128 a, i128 b) { return floor_div128(a + b - 1, b); }

// Smallest j >= 0 whose sample offset (2j+1)·H exceeds T.
inline std::int64_t first_j(std::int64_t T, std::int64_t H) {
    if (T < H) return 0;
    return floor_div64(T - H, 2 * H) + 1;
}

struct Edge {
    std::int64_t x1F, y1F, x2F, y2F;  // y1F < y2F always
    int w;                            // +1 upward, -1 downward
    std::int64_t jstart, jend;        // active sample-row range [jstart, jend)
};

struct Event {
    std::int64_t k;  // samples k' < k are crossed
    int w;
    bool operator<(const Event& o) const { return k < o.k; }
};

}  // namespace detail

/// Exact winding-fill of one tile: a sample is inside when its rightward ray
/// has positive net crossings; left/bottom polygon edges are inside, right/top
/// are outside, so abutting polygons never double-count or leave gaps.
inline CoverageTile rasterize_tile(std::span<const FlatPolygon> polys,
                                   std::span<const std::uint32_t> indices,
                                   const SampleLattice& lat, const Tile& tile) {
    CoverageTile out;
    out.px0 = tile.px0;
    out.py0 = tile.py0;
    out.w = tile.w;
    out.h = tile.h;
    out.cov.assign(std::size_t(tile.w) * std::size_t(tile.h), 0);

    const std::int64_t s = lat.s, H = lat.H;
    const std::int64_t k_lo = tile.px0 * s, k_hi = (tile.px0 + tile.w) * s;
    const std::int64_t j_lo = tile.py0 * s, j_hi = (tile.py0 + tile.h) * s;

    // collect edges overlapping this tile's sample rows
    std::vector<detail::Edge> edges;
    for (std::uint32_t pi : indices) {
        const FlatPolygon& poly = polys[pi];
        const auto& v = poly.vertices;
        if (v.size() < 3) continue;
        int orient = geom::signed_area2(v) < 0 ? -1 : 1;  // make winding positive
        for (std::size_t i = 0; i < v.size(); ++i) {
            Vec2 a = v[i], b = v[(i + 1) % v.size()];
            if (a.y == b.y) continue;  // horizontal edges never cross a ray
            detail::Edge e;
            e.w = (b.y > a.y ? 1 : -1) * orient;
            if (b.y < a.y) std::swap(a, b);
            e.x1F = a.x * 512;
            e.y1F = a.y * 512;
            e.x2F = b.x * 512;
            e.y2F = b.y * 512;
            e.jstart = std::max(j_lo, detail::first_j(lat.y1F - e.y2F, H));
            e.jend = std::min(j_hi, detail::first_j(lat.y1F - e.y1F, H));
            if (e.jstart < e.jend) edges.push_back(e);
        }
    }
    std::sort(edges.begin(), edges.end(),
              [](const detail::Edge& a, const detail::Edge& b) { return a.jstart < b.jstart; });

    std::vector<const detail::Edge*> active;
    std::vector<detail::Event> events;
    std::vector<std::int32_t> diff(std::size_t(tile.w) + 1, 0);
    std::size_t next_edge = 0;
    const std::int64_t sq = s * s;

    for (std::int64_t ty = 0; ty < tile.h; ++ty) {
        std::fill(diff.begin(), diff.end(), 0);
        for (std::int64_t sub = 0; sub < s; ++sub) {
            std::int64_t j = (tile.py0 + ty) * s + sub;
            while (next_edge < edges.size() && edges[next_edge].jstart <= j)
                active.push_back(&edges[next_edge++]);
            std::erase_if(active, [&](const detail::Edge* e) { return e->jend <= j; });
            if (active.empty()) continue;

            std::int64_t ysF = lat.sample_yF(j);
            events.clear();
            for (const detail::Edge* e : active) {
                detail::i128 D = e->y2F - e->y1F;
                detail::i128 M = detail::i128(e->x1F - lat.x0F) * D +
                                 detail::i128(e->x2F - e->x1F) * (ysF - e->y1F);
                detail::i128 t = detail::ceil_div128(M, detail::i128(H) * D);
                std::int64_t k_int = std::int64_t(detail::floor_div128(t, 2));
                k_int = std::clamp(k_int, k_lo, k_hi);
                if (k_int > k_lo) events.push_back({k_int, e->w});
            }
            if (events.empty()) continue;
            std::sort(events.begin(), events.end());

            // winding(k) = sum of weights of events with k < event.k
            std::int64_t wind = 0;
            for (const auto& ev : events) wind += ev.w;
            std::size_t ei = 0;
            std::int64_t run_from = k_lo;
            auto emit = [&](std::int64_t ka, std::int64_t kb) {
                // covered sample run [ka, kb), local to the tile
                ka -= k_lo;
                kb -= k_lo;
                std::int64_t pl = ka / s, pr = (kb - 1) / s;
                if (pl == pr) {
                    diff[std::size_t(pl)] += std::int32_t(kb - ka);
                    diff[std::size_t(pl) + 1] -= std::int32_t(kb - ka);
                    return;
                }
                std::int32_t left = std::int32_t((pl + 1) * s - ka);
                diff[std::size_t(pl)] += left;
                diff[std::size_t(pl) + 1] -= left;
                if (pl + 1 < pr) {
                    diff[std::size_t(pl) + 1] += std::int32_t(s);
                    diff[std::size_t(pr)] -= std::int32_t(s);
                }
                std::int32_t right = std::int32_t(kb - pr * s);
                diff[std::size_t(pr)] += right;
                diff[std::size_t(pr) + 1] -= right;
            };
            while (ei < events.size()) {
                std::int64_t pos = events[ei].k;
                if (wind > 0 && pos > run_from) emit(run_from, pos);
                while (ei < events.size() && events[ei].k == pos) wind -= events[ei++].w;
                run_from = std::max(run_from, pos);
            }
            // all remaining samples have winding 0 by closure
        }
        std::uint8_t* row = &out.cov[std::size_t(ty) * std::size_t(tile.w)];
        std::int32_t cnt = 0;
        for (std::int64_t x = 0; x < tile.w; ++x) {
            cnt += diff[std::size_t(x)];
            row[x] = std::uint8_t((510 * std::int64_t(cnt) + sq) / (2 * sq));
        }
    }
    return out;
}

inline CoverageTile rasterize_tile(std::span<const FlatPolygon> polys, const SampleLattice& lat,
                                   const Tile& tile) {
    std::vector<std::uint32_t> all(polys.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    return rasterize_tile(polys, all, lat, tile);
}

// ---------------------------------------------------------------------------
// Per-tile polygon buckets

/// Conservative bbox assignment of polygons to the tiles whose sample window
/// they can influence. A whole polygon is kept or dropped atomically, so the
/// net-zero crossings of polygons beside a tile are never half-counted.
inline std::vector<std::vector<std::uint32_t>> build_tile_buckets(
    std::span<const FlatPolygon> polys, const SampleLattice& lat, const TilePlan& plan) {
    std::vector<std::vector<std::uint32_t>> buckets(std::size_t(plan.count()));
    for (std::uint32_t pi = 0; pi < polys.size(); ++pi) {
        const Rect64& bb = polys[pi].bbox;
        if (!bb.valid()) continue;
        // sample index ranges the bbox can touch (closed, conservative)
        std::int64_t xloF = bb.lo.x * 512, xhiF = bb.hi.x * 512;
        std::int64_t yloF = bb.lo.y * 512, yhiF = bb.hi.y * 512;
        // columns: only samples with xF <= bbox right edge matter... and any
        // sample to the right of the bbox is influenced too (ray crossings),
        // but those net to zero per closed polygon, so the bbox span suffices.
        std::int64_t k_first = 0;
        if (xloF > lat.x0F) k_first = detail::first_j(xloF - lat.x0F, lat.H) > 0
                                          ? detail::first_j(xloF - lat.x0F, lat.H) - 1
                                          : 0;
        std::int64_t k_last = detail::first_j(xhiF - lat.x0F, lat.H);  // first sample right of bbox
        std::int64_t j_first = 0;
        if (yhiF < lat.y1F) j_first = detail::first_j(lat.y1F - yhiF, lat.H) > 0
                                          ? detail::first_j(lat.y1F - yhiF, lat.H) - 1
                                          : 0;
        std::int64_t j_last = detail::first_j(lat.y1F - yloF, lat.H);

        std::int64_t c0 = std::clamp<std::int64_t>(k_first / lat.s / plan.tile_w, 0, plan.cols - 1);
        std::int64_t c1 = std::clamp<std::int64_t>(k_last / lat.s / plan.tile_w, 0, plan.cols - 1);
        std::int64_t r0 = std::clamp<std::int64_t>(j_first / lat.s / plan.tile_h, 0, plan.rows - 1);
        std::int64_t r1 = std::clamp<std::int64_t>(j_last / lat.s / plan.tile_h, 0, plan.rows - 1);
        for (std::int64_t r = r0; r <= r1; ++r)
            for (std::int64_t c = c0; c <= c1; ++c)
                buckets[std::size_t(r * plan.cols + c)].push_back(pi);
    }
    return buckets;
}

// ---------------------------------------------------------------------------
// Scene: flattened polygons grouped by layer

struct Scene {
    std::map<LayerKey, std::vector<FlatPolygon>> layers;

    void add(FlatPolygon poly) {
        poly.compute_bbox();
        layers[poly.layer].push_back(std::move(poly));
    }

    static Scene from_library(const GdsLibrary& lib, const std::string& top) {
        Scene scene;
        geom::flatten_each(lib, top, std::nullopt,
                           [&](FlatPolygon&& p) { scene.add(std::move(p)); });
        return scene;
    }
};

/// Rasterize one layer tile by tile in row-major order (for tests and
/// debugging; the production pipeline drives rasterize_tile itself).
template <typename Sink>
void render_layer(std::span<const FlatPolygon> polys, const SampleLattice& lat,
                  const TilePlan& plan, Sink&& sink) {
    auto buckets = build_tile_buckets(polys, lat, plan);
    for (std::int64_t r = 0; r < plan.rows; ++r)
        for (std::int64_t c = 0; c < plan.cols; ++c) {
            Tile t = plan.at(c, r);
            sink(rasterize_tile(polys, buckets[std::size_t(r * plan.cols + c)], lat, t));
        }
}

inline std::string tile_debug_name(LayerKey key, std::int64_t col, std::int64_t row) {
    return "L" + std::to_string(key.layer) + "_D" + std::to_string(key.datatype) + "_tx" +
           std::to_string(col) + "_ty" + std::to_string(row) + ".png";
}

}  // namespace artistic::raster
