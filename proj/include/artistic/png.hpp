#pragma once

// Minimal PNG I/O: a streaming row-at-a-time encoder (so gigapixel images
// never sit in memory whole) and a decoder for the common lossless inputs.
// 8-bit output; input bit depths 1/2/4/8, color types 0/2/3/4/6, no interlace.

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>

#include <zlib.h>

#include "artistic/common.hpp"

namespace artistic::png {

struct PngError : IoError {
    using IoError::IoError;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(std::uint8_t(x >> 24));
    v.push_back(std::uint8_t(x >> 16));
    v.push_back(std::uint8_t(x >> 8));
    v.push_back(std::uint8_t(x));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace detail

// ---------------------------------------------------------------------------
// Streaming encoder

class PngWriter {
public:
    /// channels: 1 = grayscale, 3 = RGB, 4 = RGBA. Always 8 bits per channel.
    PngWriter(const std::string& path, std::uint32_t width, std::uint32_t height, int channels,
              int zlib_level = 4)
        : out_(path, std::ios::binary | std::ios::trunc),
          path_(path),
          width_(width),
          height_(height),
          channels_(channels) {
        if (!out_) throw PngError("cannot open for writing: " + path);
        if (width == 0 || height == 0) throw PngError("zero-dimension PNG: " + path);
        if (channels != 1 && channels != 3 && channels != 4)
            throw PngError("unsupported channel count " + std::to_string(channels));

        std::memset(&z_, 0, sizeof z_);
        if (deflateInit(&z_, zlib_level) != Z_OK) throw PngError("deflateInit failed");

        out_.write(reinterpret_cast<const char*>(detail::kSignature), 8);
        std::vector<std::uint8_t> ihdr;
        detail::put_u32(ihdr, width);
        detail::put_u32(ihdr, height);
        ihdr.push_back(8);  // bit depth
        ihdr.push_back(channels == 1 ? 0 : channels == 3 ? 2 : 6);
        ihdr.push_back(0);  // compression
        ihdr.push_back(0);  // filter method
        ihdr.push_back(0);  // no interlace
        write_chunk("IHDR", ihdr);

        stride_ = std::size_t(width) * channels;
        prev_.assign(stride_, 0);
        filtered_.resize(stride_ + 1);
        idat_buf_.resize(1 << 20);
    }

    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;
    ~PngWriter() {
        if (!finished_) deflateEnd(&z_);
    }

    std::size_t stride() const { return stride_; }

    /// Rows must arrive top to bottom, exactly `height` of them.
    void write_row(const std::uint8_t* row) {
        if (rows_written_ >= height_) throw PngError("too many rows for " + path_);
        filter_row(row);
        compress(filtered_.data(), filtered_.size(), false);
        std::memcpy(prev_.data(), row, stride_);
        ++rows_written_;
    }

    void finish() {
        if (finished_) return;
        if (rows_written_ != height_)
            throw PngError("row count mismatch for " + path_ + ": wrote " +
                           std::to_string(rows_written_) + " of " + std::to_string(height_));
        compress(nullptr, 0, true);
        flush_idat();
        deflateEnd(&z_);
        finished_ = true;
        write_chunk("IEND", {});
        out_.flush();
        if (!out_) throw PngError("write failed: " + path_);
    }

private:
    void write_chunk(const char* type, std::span<const std::uint8_t> data) {
        std::vector<std::uint8_t> head;
        detail::put_u32(head, std::uint32_t(data.size()));
        head.insert(head.end(), type, type + 4);
        out_.write(reinterpret_cast<const char*>(head.data()), std::streamsize(head.size()));
        if (!data.empty())
            out_.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
        auto crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
        if (!data.empty()) crc = crc32(crc, data.data(), uInt(data.size()));
        std::uint8_t tail[4] = {std::uint8_t(crc >> 24), std::uint8_t(crc >> 16), std::uint8_t(crc >> 8),
                                std::uint8_t(crc)};
        out_.write(reinterpret_cast<const char*>(tail), 4);
    }

    // Adaptive per-row filter: minimum sum of absolute differences heuristic.
    void filter_row(const std::uint8_t* row) {
        const int bpp = channels_;
        auto paeth = [](int a, int b, int c) {
            int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
            if (pa <= pb && pa <= pc) return a;
            return pb <= pc ? b : c;
        };
        std::uint64_t best_score = UINT64_MAX;
        int best = 0;
        for (int f = 0; f < 5; ++f) {
            auto& c = scratch_[f];
            c.resize(stride_);
            std::uint64_t score = 0;
            for (std::size_t i = 0; i < stride_; ++i) {
                int left = i >= std::size_t(bpp) ? row[i - bpp] : 0;
                int up = prev_[i];
                int ul = i >= std::size_t(bpp) ? prev_[i - bpp] : 0;
                int v;
                switch (f) {
                    case 0: v = row[i]; break;
                    case 1: v = row[i] - left; break;
                    case 2: v = row[i] - up; break;
                    case 3: v = row[i] - ((left + up) >> 1); break;
                    default: v = row[i] - paeth(left, up, ul); break;
                }
                c[i] = std::uint8_t(v);
                int s = std::int8_t(c[i]);
                score += std::uint64_t(s < 0 ? -s : s);
            }
            if (score < best_score) {
                best_score = score;
                best = f;
            }
        }
        filtered_[0] = std::uint8_t(best);
        std::memcpy(filtered_.data() + 1, scratch_[best].data(), stride_);
    }

    void compress(const std::uint8_t* data, std::size_t len, bool last) {
        z_.next_in = const_cast<Bytef*>(data);
        z_.avail_in = uInt(len);
        do {
            if (idat_fill_ == idat_buf_.size()) flush_idat();
            z_.next_out = idat_buf_.data() + idat_fill_;
            z_.avail_out = uInt(idat_buf_.size() - idat_fill_);
            int rc = deflate(&z_, last ? Z_FINISH : Z_NO_FLUSH);
            if (rc == Z_STREAM_ERROR) throw PngError("deflate failed");
            idat_fill_ = idat_buf_.size() - z_.avail_out;
            if (last && rc == Z_STREAM_END) break;
        } while (z_.avail_in > 0 || (last && idat_fill_ == idat_buf_.size()));
    }

    void flush_idat() {
        if (idat_fill_ == 0) return;
        write_chunk("IDAT", std::span(idat_buf_.data(), idat_fill_));
        idat_fill_ = 0;
    }

    std::ofstream out_;
    std::string path_;
    std::uint32_t width_, height_;
    int channels_;
    std::size_t stride_ = 0;
    std::vector<std::uint8_t> prev_, filtered_, idat_buf_;
    std::array<std::vector<std::uint8_t>, 5> scratch_;
    std::size_t idat_fill_ = 0;
    std::uint32_t rows_written_ = 0;
    z_stream z_;
    bool finished_ = false;
};

/// One-shot convenience for small images. `pixels` is row-major, 8-bit.
inline void write_png(const std::string& path, std::uint32_t w, std::uint32_t h, int channels,
                      std::span<const std::uint8_t> pixels) {
    PngWriter writer(path, w, h, channels);
    if (pixels.size() != std::size_t(w) * h * channels) throw PngError("pixel buffer size mismatch");
    for (std::uint32_t y = 0; y < h; ++y) writer.write_row(pixels.data() + std::size_t(y) * writer.stride());
    writer.finish();
}

// ---------------------------------------------------------------------------
// Decoder

struct PngRaw {
    std::uint32_t width = 0, height = 0;
    int bit_depth = 8;
    int color_type = 2;  // 0 gray, 2 rgb, 3 palette, 4 gray+alpha, 6 rgba
    std::vector<std::uint8_t> palette;        // RGB triples for type 3
    std::vector<std::uint8_t> palette_alpha;  // tRNS entries for type 3
    std::vector<std::uint8_t> idat;           // raw zlib stream, undecoded
};

struct PngImage {
    std::uint32_t width = 0, height = 0;
    std::vector<std::uint8_t> rgba;  // straight (non-premultiplied) RGBA8

    std::uint8_t* px(std::uint32_t x, std::uint32_t y) { return &rgba[4 * (std::size_t(y) * width + x)]; }
    const std::uint8_t* px(std::uint32_t x, std::uint32_t y) const {
        return &rgba[4 * (std::size_t(y) * width + x)];
    }
};

namespace detail {

inline PngRaw read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PngError("cannot open PNG: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 8 || std::memcmp(data.data(), kSignature, 8) != 0)
        throw PngError("not a PNG file: " + path);

    PngRaw raw;
    bool saw_ihdr = false, saw_iend = false;
    std::size_t pos = 8;
    while (pos + 8 <= data.size()) {
        std::uint32_t len = get_u32(&data[pos]);
        if (pos + 12 + len > data.size()) throw PngError("truncated chunk in " + path);
        std::string type(reinterpret_cast<const char*>(&data[pos + 4]), 4);
        const std::uint8_t* body = &data[pos + 8];
        auto crc_got = get_u32(&data[pos + 8 + len]);
        auto crc_want = crc32(crc32(0, &data[pos + 4], 4), body, len);
        if (crc_got != crc_want) throw PngError("chunk CRC mismatch in " + path);

        if (type == "IHDR") {
            if (len != 13) throw PngError("bad IHDR in " + path);
            raw.width = get_u32(body);
            raw.height = get_u32(body + 4);
            raw.bit_depth = body[8];
            raw.color_type = body[9];
            if (body[12] != 0) throw PngError("interlaced PNG unsupported: " + path);
            if (raw.bit_depth == 16) throw PngError("16-bit PNG unsupported: " + path);
            if (raw.width == 0 || raw.height == 0) throw PngError("zero-dimension PNG: " + path);
            saw_ihdr = true;
        } else if (type == "PLTE") {
            raw.palette.assign(body, body + len);
        } else if (type == "tRNS") {
            if (raw.color_type == 3) raw.palette_alpha.assign(body, body + len);
        } else if (type == "IDAT") {
            raw.idat.insert(raw.idat.end(), body, body + len);
        } else if (type == "IEND") {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend || raw.idat.empty()) throw PngError("incomplete PNG: " + path);
    return raw;
}

inline int samples_per_pixel(int color_type) {
    switch (color_type) {
        case 0: return 1;
        case 2: return 3;
        case 3: return 1;
        case 4: return 2;
        case 6: return 4;
        default: throw PngError("unsupported PNG color type " + std::to_string(color_type));
    }
}

inline std::vector<std::uint8_t> inflate_all(std::span<const std::uint8_t> zdata, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream z{};
    if (inflateInit(&z) != Z_OK) throw PngError("inflateInit failed");
    z.next_in = const_cast<Bytef*>(zdata.data());
    z.avail_in = uInt(zdata.size());
    z.next_out = out.data();
    z.avail_out = uInt(out.size());
    int rc = inflate(&z, Z_FINISH);
    inflateEnd(&z);
    if (rc != Z_STREAM_END || z.avail_out != 0) throw PngError("PNG inflate failed or size mismatch");
    return out;
}

inline void unfilter(std::vector<std::uint8_t>& rows, std::uint32_t height, std::size_t stride, int bpp) {
    auto paeth = [](int a, int b, int c) {
        int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
        if (pa <= pb && pa <= pc) return a;
        return pb <= pc ? b : c;
    };
    std::vector<std::uint8_t> zero(stride, 0);
    for (std::uint32_t y = 0; y < height; ++y) {
        std::uint8_t* row = &rows[y * (stride + 1)];
        const std::uint8_t* prev = y ? &rows[(y - 1) * (stride + 1) + 1] : zero.data();
        int f = row[0];
        std::uint8_t* cur = row + 1;
        switch (f) {
            case 0: break;
            case 1:
                for (std::size_t i = bpp; i < stride; ++i) cur[i] = std::uint8_t(cur[i] + cur[i - bpp]);
                break;
            case 2:
                for (std::size_t i = 0; i < stride; ++i) cur[i] = std::uint8_t(cur[i] + prev[i]);
                break;
            case 3:
                for (std::size_t i = 0; i < stride; ++i) {
                    int left = i >= std::size_t(bpp) ? cur[i - bpp] : 0;
                    cur[i] = std::uint8_t(cur[i] + ((left + prev[i]) >> 1));
                }
                break;
            case 4:
                for (std::size_t i = 0; i < stride; ++i) {
                    int left = i >= std::size_t(bpp) ? cur[i - bpp] : 0;
                    int ul = i >= std::size_t(bpp) ? prev[i - bpp] : 0;
                    cur[i] = std::uint8_t(cur[i] + paeth(left, prev[i], ul));
                }
                break;
            default: throw PngError("unknown PNG filter " + std::to_string(f));
        }
    }
}

}  // namespace detail

/// Decodes to straight RGBA8. Palette and sub-byte depths expanded.
inline PngImage read_png(const std::string& path) {
    using namespace detail;
    PngRaw raw = read_raw(path);
    int spp = samples_per_pixel(raw.color_type);
    if (raw.color_type != 3 && raw.color_type != 0 && raw.bit_depth != 8)
        throw PngError("sub-byte depth only supported for gray/palette: " + path);

    std::size_t bits_per_px = std::size_t(spp) * raw.bit_depth;
    std::size_t stride = (std::size_t(raw.width) * bits_per_px + 7) / 8;
    int bpp = int((bits_per_px + 7) / 8);
    auto rows = inflate_all(raw.idat, (stride + 1) * raw.height);
    unfilter(rows, raw.height, stride, bpp);

    PngImage img;
    img.width = raw.width;
    img.height = raw.height;
    img.rgba.resize(std::size_t(raw.width) * raw.height * 4);

    int depth = raw.bit_depth;
    int maxval = (1 << depth) - 1;
    for (std::uint32_t y = 0; y < raw.height; ++y) {
        const std::uint8_t* row = &rows[y * (stride + 1) + 1];
        for (std::uint32_t x = 0; x < raw.width; ++x) {
            std::uint8_t* dst = img.px(x, y);
            auto sample = [&](std::uint32_t idx) -> int {  // idx-th sample in this row
                if (depth == 8) return row[idx];
                std::size_t bit = std::size_t(idx) * depth;
                int v = (row[bit >> 3] >> (8 - depth - (bit & 7))) & maxval;
                return v;
            };
            switch (raw.color_type) {
                case 0: {
                    int g = sample(x) * 255 / maxval;
                    dst[0] = dst[1] = dst[2] = std::uint8_t(g);
                    dst[3] = 255;
                    break;
                }
                case 2: {
                    dst[0] = row[3 * x];
                    dst[1] = row[3 * x + 1];
                    dst[2] = row[3 * x + 2];
                    dst[3] = 255;
                    break;
                }
                case 3: {
                    int idx = sample(x);
                    if (std::size_t(idx) * 3 + 2 >= raw.palette.size())
                        throw PngError("palette index out of range in " + path);
                    dst[0] = raw.palette[3 * idx];
                    dst[1] = raw.palette[3 * idx + 1];
                    dst[2] = raw.palette[3 * idx + 2];
                    dst[3] = std::size_t(idx) < raw.palette_alpha.size() ? raw.palette_alpha[idx] : 255;
                    break;
                }
                case 4: {
                    dst[0] = dst[1] = dst[2] = row[2 * x];
                    dst[3] = row[2 * x + 1];
                    break;
                }
                case 6: {
                    std::memcpy(dst, &row[4 * x], 4);
                    break;
                }
                default: throw PngError("unsupported PNG color type");
            }
        }
    }
    return img;
}

/// Header + undecoded zlib stream, for embedding into other containers.
inline PngRaw read_png_raw(const std::string& path) { return detail::read_raw(path); }

}  // namespace artistic::png
