#pragma once

// Layer coloring, premultiplied source-over compositing, box downscaling,
// and the streaming stitcher that turns row-major tiles into PNG parts.

#include <array>
#include <filesystem>

#include "artistic/pdf.hpp"
#include "artistic/png.hpp"
#include "artistic/raster.hpp"

namespace artistic::compose {

using gds::LayerKey;

struct ComposeError : Error {
    using Error::Error;
};

struct LayerStyle {
    LayerKey key;
    std::array<std::uint8_t, 3> color = {255, 255, 255};
    double opacity = 1.0;
    int z_order = 0;  // unique; higher draws above lower
    friend bool operator==(const LayerStyle&, const LayerStyle&) = default;
};

struct RgbaTile {
    std::int64_t px0 = 0, py0 = 0;
    std::int64_t w = 0, h = 0;
    std::vector<std::uint8_t> px;  // premultiplied RGBA, row-major top-down

    std::uint8_t* at(std::int64_t x, std::int64_t y) {
        return &px[(std::size_t(y) * std::size_t(w) + std::size_t(x)) * 4];
    }
    const std::uint8_t* at(std::int64_t x, std::int64_t y) const {
        return &px[(std::size_t(y) * std::size_t(w) + std::size_t(x)) * 4];
    }
};

// ---------------------------------------------------------------------------
// Colorize: coverage byte -> premultiplied RGBA through a 256-entry table

struct ColorLut {
    std::uint8_t a[256];
    std::uint8_t c[3][256];
};

/// alpha = round(opacity * cov), channel = round(opacity * cov * color / 255),
/// ties away from zero. Monotone, so channel <= alpha always holds.
inline ColorLut make_lut(const LayerStyle& style) {
    if (!(style.opacity >= 0.0 && style.opacity <= 1.0))
        throw ComposeError("layer opacity must lie in [0, 1]");
    ColorLut lut;
    for (int v = 0; v < 256; ++v) {
        lut.a[v] = std::uint8_t(std::llround(style.opacity * v));
        for (int ch = 0; ch < 3; ++ch)
            lut.c[ch][v] =
                std::uint8_t(std::llround(style.opacity * v * style.color[ch] / 255.0));
    }
    return lut;
}

inline RgbaTile colorize(const raster::CoverageTile& cov, const ColorLut& lut) {
    RgbaTile t;
    t.px0 = cov.px0;
    t.py0 = cov.py0;
    t.w = cov.w;
    t.h = cov.h;
    t.px.resize(std::size_t(t.w) * std::size_t(t.h) * 4);
    for (std::size_t i = 0; i < cov.cov.size(); ++i) {
        std::uint8_t v = cov.cov[i];
        t.px[i * 4 + 0] = lut.c[0][v];
        t.px[i * 4 + 1] = lut.c[1][v];
        t.px[i * 4 + 2] = lut.c[2][v];
        t.px[i * 4 + 3] = lut.a[v];
    }
    return t;
}

// ---------------------------------------------------------------------------
// Compositing

inline RgbaTile background_tile(std::int64_t px0, std::int64_t py0, std::int64_t w, std::int64_t h,
                                const std::uint8_t color[3]) {
    RgbaTile t;
    t.px0 = px0;
    t.py0 = py0;
    t.w = w;
    t.h = h;
    t.px.resize(std::size_t(w) * std::size_t(h) * 4);
    for (std::size_t i = 0; i < std::size_t(w) * std::size_t(h); ++i) {
        t.px[i * 4 + 0] = color[0];
        t.px[i * 4 + 1] = color[1];
        t.px[i * 4 + 2] = color[2];
        t.px[i * 4 + 3] = 255;
    }
    return t;
}

/// Premultiplied source-over, integer-exact rounding:
/// out = above + round(acc * (255 - above_alpha) / 255), applied per channel.
inline void composite_over(RgbaTile& acc, const RgbaTile& above) {
    if (acc.w != above.w || acc.h != above.h)
        throw ComposeError("compositing tiles of different sizes");
    for (std::size_t i = 0; i < acc.px.size(); i += 4) {
        std::int64_t keep = 255 - above.px[i + 3];
        for (std::size_t ch = 0; ch < 4; ++ch)
            acc.px[i + ch] =
                std::uint8_t(above.px[i + ch] + (2 * keep * acc.px[i + ch] + 255) / 510);
    }
}

// ---------------------------------------------------------------------------
// Wide accumulation path: 8.8 fixed point (channel value × 256).
//
// Folding eight semi-transparent layers with per-step 8-bit rounding drifts
// up to ±4 counts from the exact float fold; accumulating in 8.8 fixed point
// keeps the drift below 1/16 count, so a single final quantization stays
// within ±1 of the float reference. The 8-bit ops above remain the canonical
// single-step semantics.

struct Rgba16Tile {
    std::int64_t px0 = 0, py0 = 0;
    std::int64_t w = 0, h = 0;
    std::vector<std::uint16_t> px;  // premultiplied RGBA × 256, max 65280

    std::uint16_t* at(std::int64_t x, std::int64_t y) {
        return &px[(std::size_t(y) * std::size_t(w) + std::size_t(x)) * 4];
    }
};

struct ColorLut16 {
    std::uint16_t a[256];
    std::uint16_t c[3][256];
};

inline ColorLut16 make_lut16(const LayerStyle& style) {
    if (!(style.opacity >= 0.0 && style.opacity <= 1.0))
        throw ComposeError("layer opacity must lie in [0, 1]");
    ColorLut16 lut;
    for (int v = 0; v < 256; ++v) {
        lut.a[v] = std::uint16_t(std::llround(style.opacity * v * 256.0));
        for (int ch = 0; ch < 3; ++ch)
            lut.c[ch][v] =
                std::uint16_t(std::llround(style.opacity * v * 256.0 * style.color[ch] / 255.0));
    }
    return lut;
}

inline Rgba16Tile colorize16(const raster::CoverageTile& cov, const ColorLut16& lut) {
    Rgba16Tile t;
    t.px0 = cov.px0;
    t.py0 = cov.py0;
    t.w = cov.w;
    t.h = cov.h;
    t.px.resize(std::size_t(t.w) * std::size_t(t.h) * 4);
    for (std::size_t i = 0; i < cov.cov.size(); ++i) {
        std::uint8_t v = cov.cov[i];
        t.px[i * 4 + 0] = lut.c[0][v];
        t.px[i * 4 + 1] = lut.c[1][v];
        t.px[i * 4 + 2] = lut.c[2][v];
        t.px[i * 4 + 3] = lut.a[v];
    }
    return t;
}

inline Rgba16Tile background_tile16(std::int64_t px0, std::int64_t py0, std::int64_t w,
                                    std::int64_t h, const std::uint8_t color[3]) {
    Rgba16Tile t;
    t.px0 = px0;
    t.py0 = py0;
    t.w = w;
    t.h = h;
    t.px.resize(std::size_t(w) * std::size_t(h) * 4);
    for (std::size_t i = 0; i < std::size_t(w) * std::size_t(h); ++i) {
        for (int ch = 0; ch < 3; ++ch) t.px[i * 4 + ch] = std::uint16_t(color[ch] * 256);
        t.px[i * 4 + 3] = 65280;
    }
    return t;
}

inline void composite_over16(Rgba16Tile& acc, const Rgba16Tile& above) {
    if (acc.w != above.w || acc.h != above.h)
        throw ComposeError("compositing tiles of different sizes");
    for (std::size_t i = 0; i < acc.px.size(); i += 4) {
        std::uint64_t keep = 65280 - above.px[i + 3];
        for (std::size_t ch = 0; ch < 4; ++ch)
            acc.px[i + ch] = std::uint16_t(
                above.px[i + ch] +
                (2 * keep * acc.px[i + ch] + 65280) / (2 * 65280));
    }
}

/// Final rounding to 8 bits, half away from zero.
inline RgbaTile quantize(const Rgba16Tile& t) {
    RgbaTile out;
    out.px0 = t.px0;
    out.py0 = t.py0;
    out.w = t.w;
    out.h = t.h;
    out.px.resize(t.px.size());
    for (std::size_t i = 0; i < t.px.size(); ++i)
        out.px[i] = std::uint8_t((t.px[i] + 128) >> 8);
    return out;
}

inline Rgba16Tile downscale16(const Rgba16Tile& t, int f) {
    if (f != 1 && f != 2 && f != 4 && f != 8)
        throw ComposeError("downscale factor must be 1, 2, 4 or 8");
    if (f == 1) return t;
    if (t.px0 % f != 0 || t.py0 % f != 0)
        throw ComposeError("tile origin not aligned to the downscale factor");
    Rgba16Tile out;
    out.px0 = t.px0 / f;
    out.py0 = t.py0 / f;
    out.w = (t.w + f - 1) / f;
    out.h = (t.h + f - 1) / f;
    out.px.resize(std::size_t(out.w) * std::size_t(out.h) * 4);
    for (std::int64_t y = 0; y < out.h; ++y)
        for (std::int64_t x = 0; x < out.w; ++x) {
            std::int64_t x0 = x * f, y0 = y * f;
            std::int64_t x1 = std::min<std::int64_t>(x0 + f, t.w);
            std::int64_t y1 = std::min<std::int64_t>(y0 + f, t.h);
            std::int64_t n = (x1 - x0) * (y1 - y0);
            std::int64_t sum[4] = {0, 0, 0, 0};
            for (std::int64_t sy = y0; sy < y1; ++sy) {
                const std::uint16_t* p =
                    &t.px[(std::size_t(sy) * std::size_t(t.w) + std::size_t(x0)) * 4];
                for (std::int64_t sx = x0; sx < x1; ++sx, p += 4)
                    for (int ch = 0; ch < 4; ++ch) sum[ch] += p[ch];
            }
            std::uint16_t* o = out.at(x, y);
            for (int ch = 0; ch < 4; ++ch)
                o[ch] = std::uint16_t((2 * sum[ch] + n) / (2 * n));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Downscale: exact box mean with divisor-aware rounding at ragged edges

inline RgbaTile downscale(const RgbaTile& t, int f) {
    if (f != 1 && f != 2 && f != 4 && f != 8)
        throw ComposeError("downscale factor must be 1, 2, 4 or 8");
    if (f == 1) return t;
    if (t.px0 % f != 0 || t.py0 % f != 0)
        throw ComposeError("tile origin not aligned to the downscale factor");
    RgbaTile out;
    out.px0 = t.px0 / f;
    out.py0 = t.py0 / f;
    out.w = (t.w + f - 1) / f;
    out.h = (t.h + f - 1) / f;
    out.px.resize(std::size_t(out.w) * std::size_t(out.h) * 4);
    for (std::int64_t y = 0; y < out.h; ++y)
        for (std::int64_t x = 0; x < out.w; ++x) {
            std::int64_t x0 = x * f, y0 = y * f;
            std::int64_t x1 = std::min<std::int64_t>(x0 + f, t.w);
            std::int64_t y1 = std::min<std::int64_t>(y0 + f, t.h);
            std::int64_t n = (x1 - x0) * (y1 - y0);
            std::int64_t sum[4] = {0, 0, 0, 0};
            for (std::int64_t sy = y0; sy < y1; ++sy) {
                const std::uint8_t* p = t.at(x0, sy);
                for (std::int64_t sx = x0; sx < x1; ++sx, p += 4)
                    for (int ch = 0; ch < 4; ++ch) sum[ch] += p[ch];
            }
            std::uint8_t* o = out.at(x, y);
            for (int ch = 0; ch < 4; ++ch)
                o[ch] = std::uint8_t((2 * sum[ch] + n) / (2 * n));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Stitcher: row-major final-resolution tiles -> full-width PNG band parts

class Stitcher {
  public:
    Stitcher(std::filesystem::path dir, std::string base, std::int64_t out_w, std::int64_t out_h,
             double dpi, std::int64_t max_png_px)
        : dir_(std::move(dir)), base_(std::move(base)), out_w_(out_w), out_h_(out_h), dpi_(dpi) {
        if (out_w < 1 || out_h < 1) throw ComposeError("stitched image must be at least 1x1");
        if (max_png_px < out_w)
            throw ComposeError("max_png_px smaller than a single output row");
        band_h_ = std::min<std::int64_t>(out_h, max_png_px / out_w);
        manifest_.width_px = out_w;
        manifest_.height_px = out_h;
        manifest_.dpi = dpi;
    }

    /// Feed tiles left-to-right, top tile-row first. Tiles must share a py0
    /// and height within one tile-row and abut exactly.
    void push(const RgbaTile& tile) {
        if (strip_.empty()) begin_strip(tile);
        if (tile.py0 != strip_py0_ || tile.h != strip_h_ || tile.px0 != next_x_)
            throw ComposeError("tiles arrived out of row-major order");
        for (std::int64_t y = 0; y < tile.h; ++y) {
            const std::uint8_t* src = tile.at(0, y);
            std::uint8_t* dst = &strip_[(std::size_t(y) * std::size_t(out_w_) + std::size_t(next_x_)) * 3];
            for (std::int64_t x = 0; x < tile.w; ++x, src += 4, dst += 3) {
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
            }
        }
        next_x_ += tile.w;
        if (next_x_ == out_w_) flush_strip();
    }

    /// Finish all parts and return the manifest (file entries hold full paths).
    pdf::PageManifest finish() {
        if (!strip_.empty() || rows_done_ != out_h_)
            throw ComposeError("stitcher finished before the image was complete");
        if (writer_) end_part();
        return manifest_;
    }

  private:
    void begin_strip(const RgbaTile& tile) {
        if (tile.py0 != rows_done_ || tile.px0 != 0)
            throw ComposeError("tiles arrived out of row-major order");
        strip_py0_ = tile.py0;
        strip_h_ = tile.h;
        next_x_ = 0;
        strip_.assign(std::size_t(strip_h_) * std::size_t(out_w_) * 3, 0);
    }

    void flush_strip() {
        for (std::int64_t y = 0; y < strip_h_; ++y) {
            if (!writer_) begin_part();
            writer_->write_row(&strip_[std::size_t(y) * std::size_t(out_w_) * 3]);
            ++rows_done_;
            ++part_rows_written_;
            if (part_rows_written_ == part_rows_total_) end_part();
        }
        strip_.clear();
    }

    void begin_part() {
        part_rows_total_ = std::min(band_h_, out_h_ - rows_done_);
        part_rows_written_ = 0;
        part_y0_ = rows_done_;
        std::string name = base_ + "_part" + std::to_string(manifest_.parts.size()) + ".png";
        part_path_ = (dir_ / name).string();
        writer_.emplace(part_path_, std::uint32_t(out_w_), std::uint32_t(part_rows_total_), 3);
    }

    void end_part() {
        writer_->finish();
        writer_.reset();
        pdf::ImagePart part;
        part.file = part_path_;
        part.x = 0;
        part.y = part_y0_;
        part.w = std::uint32_t(out_w_);
        part.h = std::uint32_t(part_rows_total_);
        manifest_.parts.push_back(std::move(part));
    }

    std::filesystem::path dir_;
    std::string base_;
    std::int64_t out_w_, out_h_;
    double dpi_;
    std::int64_t band_h_ = 0;

    std::vector<std::uint8_t> strip_;  // RGB rows for the current tile-row
    std::int64_t strip_py0_ = 0, strip_h_ = 0, next_x_ = 0;
    std::int64_t rows_done_ = 0;

    std::optional<png::PngWriter> writer_;
    std::string part_path_;
    std::int64_t part_rows_total_ = 0, part_rows_written_ = 0, part_y0_ = 0;

    pdf::PageManifest manifest_;
};

// ---------------------------------------------------------------------------

/// Styles sorted bottom-to-top; validates that z_orders are unique.
inline std::vector<LayerStyle> sort_styles(std::vector<LayerStyle> styles) {
    std::sort(styles.begin(), styles.end(),
              [](const LayerStyle& a, const LayerStyle& b) { return a.z_order < b.z_order; });
    for (std::size_t i = 1; i < styles.size(); ++i)
        if (styles[i].z_order == styles[i - 1].z_order)
            throw ComposeError("duplicate z_order " + std::to_string(styles[i].z_order));
    return styles;
}

}  // namespace artistic::compose
