#pragma once

// GDSII stream format reader/writer plus layer extraction and library merging.
// Records are big-endian: 2-byte total length, 1-byte record type, 1-byte data type.

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <variant>

#include "artistic/common.hpp"

namespace artistic::gds {

struct ParseError : Error {
    using Error::Error;
};
struct WriteError : Error {
    using Error::Error;
};

struct LayerKey {
    int layer = 0;
    int datatype = 0;
    friend constexpr bool operator==(LayerKey, LayerKey) = default;
    friend constexpr auto operator<=>(LayerKey, LayerKey) = default;
};

struct GdsUnits {
    double user_unit_per_dbu = 1e-3;
    double meters_per_dbu = 1e-9;

    double nm_per_dbu() const { return meters_per_dbu * 1e9; }
    double um_per_dbu() const { return meters_per_dbu * 1e6; }
    friend bool operator==(const GdsUnits&, const GdsUnits&) = default;
};

struct GdsTransform {
    bool reflect_x = false;
    double magnification = 1.0;
    double angle_deg = 0.0;
    Vec2 translate;

    bool is_identity() const {
        return !reflect_x && magnification == 1.0 && angle_deg == 0.0 && translate == Vec2{};
    }
    friend bool operator==(const GdsTransform&, const GdsTransform&) = default;
};

struct GdsBoundary {
    int layer = 0;
    int datatype = 0;
    std::vector<Vec2> points;  // unique vertices, implicitly closed (no repeated first point)

    LayerKey key() const { return {layer, datatype}; }
    friend bool operator==(const GdsBoundary&, const GdsBoundary&) = default;
};

struct GdsPath {
    int layer = 0;
    int datatype = 0;
    std::int64_t width = 0;
    int pathtype = 0;  // 0 flush, 1 round, 2 extended square
    std::vector<Vec2> points;

    LayerKey key() const { return {layer, datatype}; }
    friend bool operator==(const GdsPath&, const GdsPath&) = default;
};

struct GdsSRef {
    std::string target;
    GdsTransform transform;
    friend bool operator==(const GdsSRef&, const GdsSRef&) = default;
};

struct GdsARef {
    std::string target;
    GdsTransform transform;
    int cols = 1;
    int rows = 1;
    Vec2 col_step;
    Vec2 row_step;
    friend bool operator==(const GdsARef&, const GdsARef&) = default;
};

// TEXT/NODE/BOX elements are retained record-for-record so a parsed library
// re-serializes byte-identically, but they carry no render geometry.
struct GdsRawRecord {
    std::uint8_t rtype = 0;
    std::uint8_t dtype = 0;
    std::vector<std::uint8_t> payload;
    friend bool operator==(const GdsRawRecord&, const GdsRawRecord&) = default;
};

struct GdsOpaqueElement {
    enum class Kind { Text, Node, Box } kind = Kind::Text;
    std::vector<GdsRawRecord> records;  // from the opening record through ENDEL
    friend bool operator==(const GdsOpaqueElement&, const GdsOpaqueElement&) = default;
};

using GdsElement = std::variant<GdsBoundary, GdsPath, GdsSRef, GdsARef, GdsOpaqueElement>;

struct GdsStructure {
    std::string name;
    std::vector<GdsElement> elements;
    friend bool operator==(const GdsStructure&, const GdsStructure&) = default;
};

struct GdsLibrary {
    std::string name = "LIB";
    GdsUnits units;
    std::vector<GdsStructure> structures;

    const GdsStructure* find(const std::string& sname) const {
        for (const auto& s : structures)
            if (s.name == sname) return &s;
        return nullptr;
    }
    friend bool operator==(const GdsLibrary&, const GdsLibrary&) = default;
};

struct ParseStats {
    std::uint32_t skipped_records = 0;  // unknown or unhandled record types
    std::uint32_t skipped_elements = 0; // degenerate geometry dropped
};

// ---------------------------------------------------------------------------
// Record types (the subset this toolchain understands)

namespace rec {
constexpr std::uint8_t HEADER = 0x00, BGNLIB = 0x01, LIBNAME = 0x02, UNITS = 0x03,
                       ENDLIB = 0x04, BGNSTR = 0x05, STRNAME = 0x06, ENDSTR = 0x07,
                       BOUNDARY = 0x08, PATH = 0x09, SREF = 0x0A, AREF = 0x0B, TEXT = 0x0C,
                       LAYER = 0x0D, DATATYPE = 0x0E, WIDTH = 0x0F, XY = 0x10, ENDEL = 0x11,
                       SNAME = 0x12, COLROW = 0x13, NODE = 0x15, TEXTTYPE = 0x16,
                       PRESENTATION = 0x17, STRING = 0x19, STRANS = 0x1A, MAG = 0x1B,
                       ANGLE = 0x1C, PATHTYPE = 0x21, NODETYPE = 0x2A, BOX = 0x2D,
                       BOXTYPE = 0x2E;
}

// ---------------------------------------------------------------------------
// 8-byte excess-64 real (sign, 7-bit base-16 exponent, 56-bit fraction)

inline void encode_real8(double v, std::uint8_t out[8]) {
    std::memset(out, 0, 8);
    if (v == 0.0) return;
    bool neg = v < 0.0;
    double a = std::abs(v);
    int bexp = 0;
    double frac = std::frexp(a, &bexp);  // a = frac * 2^bexp, frac in [0.5, 1)
    // choose E with a = m * 16^(E-64), m in [1/16, 1)
    int e16 = (bexp + 3) >> 2;           // ceil(bexp / 4)
    int shift = 56 + bexp - 4 * e16;     // in {53, 54, 55, 56}
    double scaled = std::ldexp(frac, shift);
    auto mant = static_cast<std::uint64_t>(scaled);
    if (scaled - static_cast<double>(mant) >= 0.5) ++mant;
    if (mant >= (1ull << 56)) {
        mant >>= 4;
        ++e16;
    }
    int exp_field = e16 + 64;
    if (exp_field < 0 || exp_field > 127)
        throw WriteError("real8 exponent out of range for value " + std::to_string(v));
    out[0] = static_cast<std::uint8_t>((neg ? 0x80 : 0x00) | exp_field);
    for (int i = 0; i < 7; ++i)
        out[1 + i] = static_cast<std::uint8_t>((mant >> (8 * (6 - i))) & 0xFF);
}

inline double decode_real8(const std::uint8_t in[8]) {
    std::uint64_t mant = 0;
    for (int i = 0; i < 7; ++i) mant = (mant << 8) | in[1 + i];
    if (mant == 0) return 0.0;
    int e16 = (in[0] & 0x7F) - 64;
    double v = std::ldexp(static_cast<double>(mant), 4 * e16 - 56);
    return (in[0] & 0x80) ? -v : v;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Record {
    std::uint8_t rtype = 0;
    std::uint8_t dtype = 0;
    std::span<const std::uint8_t> payload;
    std::size_t offset = 0;  // byte offset of the record header in the stream
};

class RecordReader {
public:
    explicit RecordReader(std::span<const std::uint8_t> data) : data_(data) {}

    bool eof() const { return pos_ >= data_.size(); }
    std::size_t offset() const { return pos_; }

    Record next() {
        std::size_t at = pos_;
        if (data_.size() - pos_ < 4)
            throw ParseError("truncated record header at byte offset " + std::to_string(at));
        std::uint16_t len = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
        if (len & 1)
            throw ParseError("odd record length at byte offset " + std::to_string(at));
        if (len < 4)
            throw ParseError("record length below header size at byte offset " + std::to_string(at));
        if (len > data_.size() - pos_)
            throw ParseError("truncated record at byte offset " + std::to_string(at));
        Record r;
        r.rtype = data_[pos_ + 2];
        r.dtype = data_[pos_ + 3];
        r.payload = data_.subspan(pos_ + 4, len - 4);
        r.offset = at;
        pos_ += len;
        return r;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline std::int16_t read_i16(std::span<const std::uint8_t> p, std::size_t at) {
    return static_cast<std::int16_t>((p[at] << 8) | p[at + 1]);
}
inline std::int32_t read_i32(std::span<const std::uint8_t> p, std::size_t at) {
    return static_cast<std::int32_t>((std::uint32_t(p[at]) << 24) | (std::uint32_t(p[at + 1]) << 16) |
                                     (std::uint32_t(p[at + 2]) << 8) | std::uint32_t(p[at + 3]));
}

inline std::string read_name(const Record& r) {
    std::string s(reinterpret_cast<const char*>(r.payload.data()), r.payload.size());
    while (!s.empty() && s.back() == '\0') s.pop_back();
    return s;
}

inline std::vector<Vec2> read_xy(const Record& r) {
    if (r.payload.size() % 8 != 0)
        throw ParseError("malformed XY record at byte offset " + std::to_string(r.offset));
    std::vector<Vec2> pts(r.payload.size() / 8);
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i] = {read_i32(r.payload, 8 * i), read_i32(r.payload, 8 * i + 4)};
    return pts;
}

inline int read_u16_field(const Record& r, const char* what) {
    if (r.payload.size() < 2)
        throw ParseError(std::string("short ") + what + " record at byte offset " +
                         std::to_string(r.offset));
    return (r.payload[0] << 8) | r.payload[1];
}

// STRANS + optional MAG/ANGLE, shared by SREF and AREF.
struct TransformAccum {
    GdsTransform t;

    bool absorb(const Record& r) {
        switch (r.rtype) {
            case rec::STRANS:
                if (r.payload.size() >= 2) t.reflect_x = (r.payload[0] & 0x80) != 0;
                return true;
            case rec::MAG:
                if (r.payload.size() >= 8) t.magnification = decode_real8(r.payload.data());
                return true;
            case rec::ANGLE:
                if (r.payload.size() >= 8) t.angle_deg = decode_real8(r.payload.data());
                return true;
            default:
                return false;
        }
    }
};

}  // namespace detail

/// Parses a GDSII byte stream. TEXT/NODE/BOX elements are retained opaquely;
/// unknown record types are skipped and counted in stats.
inline GdsLibrary parse_library(std::span<const std::uint8_t> data, ParseStats* stats = nullptr) {
    using namespace detail;
    ParseStats local;
    ParseStats& st = stats ? *stats : local;
    RecordReader reader(data);

    if (reader.eof()) throw ParseError("empty stream, missing HEADER at byte offset 0");
    Record r = reader.next();
    if (r.rtype != rec::HEADER)
        throw ParseError("stream does not begin with HEADER at byte offset 0");

    GdsLibrary lib;
    bool have_units = false;
    bool ended = false;

    auto parse_element = [&](std::uint8_t open_type, std::size_t open_offset) -> std::optional<GdsElement> {
        switch (open_type) {
            case rec::BOUNDARY: {
                GdsBoundary b;
                for (;;) {
                    if (reader.eof())
                        throw ParseError("missing ENDLIB (stream ends inside element) at byte offset " +
                                         std::to_string(reader.offset()));
                    Record e = reader.next();
                    if (e.rtype == rec::ENDEL) break;
                    if (e.rtype == rec::LAYER) b.layer = read_u16_field(e, "LAYER");
                    else if (e.rtype == rec::DATATYPE) b.datatype = read_u16_field(e, "DATATYPE");
                    else if (e.rtype == rec::XY) b.points = read_xy(e);
                    else ++st.skipped_records;
                }
                if (!b.points.empty() && b.points.front() == b.points.back()) b.points.pop_back();
                if (b.points.size() < 3) {
                    ++st.skipped_elements;
                    return std::nullopt;
                }
                return GdsElement{std::move(b)};
            }
            case rec::PATH: {
                GdsPath p;
                for (;;) {
                    if (reader.eof())
                        throw ParseError("missing ENDLIB (stream ends inside element) at byte offset " +
                                         std::to_string(reader.offset()));
                    Record e = reader.next();
                    if (e.rtype == rec::ENDEL) break;
                    if (e.rtype == rec::LAYER) p.layer = read_u16_field(e, "LAYER");
                    else if (e.rtype == rec::DATATYPE) p.datatype = read_u16_field(e, "DATATYPE");
                    else if (e.rtype == rec::PATHTYPE) p.pathtype = read_u16_field(e, "PATHTYPE");
                    else if (e.rtype == rec::WIDTH && e.payload.size() >= 4)
                        p.width = std::abs(static_cast<std::int64_t>(read_i32(e.payload, 0)));
                    else if (e.rtype == rec::XY) p.points = read_xy(e);
                    else ++st.skipped_records;
                }
                if (p.points.size() < 2) {
                    ++st.skipped_elements;
                    return std::nullopt;
                }
                return GdsElement{std::move(p)};
            }
            case rec::SREF: {
                GdsSRef s;
                TransformAccum acc;
                for (;;) {
                    if (reader.eof())
                        throw ParseError("missing ENDLIB (stream ends inside element) at byte offset " +
                                         std::to_string(reader.offset()));
                    Record e = reader.next();
                    if (e.rtype == rec::ENDEL) break;
                    if (e.rtype == rec::SNAME) s.target = read_name(e);
                    else if (acc.absorb(e)) continue;
                    else if (e.rtype == rec::XY) {
                        auto pts = read_xy(e);
                        if (!pts.empty()) acc.t.translate = pts[0];
                    } else ++st.skipped_records;
                }
                s.transform = acc.t;
                return GdsElement{std::move(s)};
            }
            case rec::AREF: {
                GdsARef a;
                TransformAccum acc;
                std::vector<Vec2> pts;
                for (;;) {
                    if (reader.eof())
                        throw ParseError("missing ENDLIB (stream ends inside element) at byte offset " +
                                         std::to_string(reader.offset()));
                    Record e = reader.next();
                    if (e.rtype == rec::ENDEL) break;
                    if (e.rtype == rec::SNAME) a.target = read_name(e);
                    else if (acc.absorb(e)) continue;
                    else if (e.rtype == rec::COLROW) {
                        if (e.payload.size() < 4)
                            throw ParseError("short COLROW record at byte offset " + std::to_string(e.offset));
                        a.cols = read_i16(e.payload, 0);
                        a.rows = read_i16(e.payload, 2);
                        if (a.cols < 1 || a.rows < 1)
                            throw ParseError("invalid COLROW counts at byte offset " + std::to_string(e.offset));
                    } else if (e.rtype == rec::XY) pts = read_xy(e);
                    else ++st.skipped_records;
                }
                if (pts.size() < 3)
                    throw ParseError("AREF without 3-point lattice at byte offset " + std::to_string(open_offset));
                acc.t.translate = pts[0];
                a.transform = acc.t;
                a.col_step = {(pts[1].x - pts[0].x) / a.cols, (pts[1].y - pts[0].y) / a.cols};
                a.row_step = {(pts[2].x - pts[0].x) / a.rows, (pts[2].y - pts[0].y) / a.rows};
                return GdsElement{std::move(a)};
            }
            case rec::TEXT:
            case rec::NODE:
            case rec::BOX: {
                GdsOpaqueElement o;
                o.kind = open_type == rec::TEXT   ? GdsOpaqueElement::Kind::Text
                         : open_type == rec::NODE ? GdsOpaqueElement::Kind::Node
                                                  : GdsOpaqueElement::Kind::Box;
                o.records.push_back({open_type, 0x00, {}});
                for (;;) {
                    if (reader.eof())
                        throw ParseError("missing ENDLIB (stream ends inside element) at byte offset " +
                                         std::to_string(reader.offset()));
                    Record e = reader.next();
                    o.records.push_back(
                        {e.rtype, e.dtype, std::vector<std::uint8_t>(e.payload.begin(), e.payload.end())});
                    if (e.rtype == rec::ENDEL) break;
                }
                return GdsElement{std::move(o)};
            }
            default:
                return std::nullopt;
        }
    };

    while (!reader.eof()) {
        Record top = reader.next();
        if (top.rtype == rec::ENDLIB) {
            ended = true;
            break;
        }
        switch (top.rtype) {
            case rec::BGNLIB:
                break;  // timestamps ignored
            case rec::LIBNAME:
                lib.name = detail::read_name(top);
                break;
            case rec::UNITS: {
                if (top.payload.size() < 16)
                    throw ParseError("short UNITS record at byte offset " + std::to_string(top.offset));
                lib.units.user_unit_per_dbu = decode_real8(top.payload.data());
                lib.units.meters_per_dbu = decode_real8(top.payload.data() + 8);
                if (!(lib.units.user_unit_per_dbu > 0.0) || !(lib.units.meters_per_dbu > 0.0))
                    throw ParseError("non-positive UNITS at byte offset " + std::to_string(top.offset));
                have_units = true;
                break;
            }
            case rec::BGNSTR: {
                GdsStructure s;
                bool closed = false;
                while (!reader.eof()) {
                    Record e = reader.next();
                    if (e.rtype == rec::ENDSTR) {
                        closed = true;
                        break;
                    }
                    if (e.rtype == rec::STRNAME) {
                        s.name = detail::read_name(e);
                        continue;
                    }
                    if (auto el = parse_element(e.rtype, e.offset))
                        s.elements.push_back(std::move(*el));
                    else if (e.rtype != rec::BOUNDARY && e.rtype != rec::PATH)
                        ++st.skipped_records;
                }
                if (!closed)
                    throw ParseError("missing ENDLIB (stream ends inside structure) at byte offset " +
                                     std::to_string(reader.offset()));
                lib.structures.push_back(std::move(s));
                break;
            }
            default:
                ++st.skipped_records;
                break;
        }
    }
    if (!ended)
        throw ParseError("missing ENDLIB at byte offset " + std::to_string(reader.offset()));
    if (!have_units)
        throw ParseError("UNITS record absent at byte offset " + std::to_string(reader.offset()));
    return lib;
}

inline GdsLibrary parse_library_file(const std::string& path, ParseStats* stats = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open GDSII file: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_library(data, stats);
}

// ---------------------------------------------------------------------------
// Writing

namespace detail {

class RecordWriter {
public:
    explicit RecordWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void record(std::uint8_t rtype, std::uint8_t dtype, std::span<const std::uint8_t> payload = {}) {
        std::size_t len = 4 + payload.size() + (payload.size() & 1);
        if (len > 0xFFFF)
            throw WriteError("record payload too large (" + std::to_string(payload.size()) + " bytes)");
        out_.push_back(static_cast<std::uint8_t>(len >> 8));
        out_.push_back(static_cast<std::uint8_t>(len & 0xFF));
        out_.push_back(rtype);
        out_.push_back(dtype);
        out_.insert(out_.end(), payload.begin(), payload.end());
        if (payload.size() & 1) out_.push_back(0);
    }

    void i16(std::uint8_t rtype, std::initializer_list<std::int32_t> vals) {
        std::vector<std::uint8_t> p;
        p.reserve(vals.size() * 2);
        for (auto v : vals) {
            p.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
            p.push_back(static_cast<std::uint8_t>(v & 0xFF));
        }
        record(rtype, 0x02, p);
    }

    void name(std::uint8_t rtype, const std::string& s) {
        if (s.empty()) throw WriteError("empty name");
        if (s.size() > 32) throw WriteError("name too long (max 32 bytes): " + s);
        record(rtype, 0x06, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }

    void xy(std::span<const Vec2> pts) {
        std::vector<std::uint8_t> p;
        p.reserve(pts.size() * 8);
        for (auto v : pts) {
            push_i32(p, v.x);
            push_i32(p, v.y);
        }
        record(rec::XY, 0x03, p);
    }

    void real8s(std::uint8_t rtype, std::initializer_list<double> vals) {
        std::vector<std::uint8_t> p(vals.size() * 8);
        std::size_t i = 0;
        for (double v : vals) encode_real8(v, p.data() + 8 * (i++));
        record(rtype, 0x05, p);
    }

    static void push_i32(std::vector<std::uint8_t>& p, std::int64_t v) {
        if (v < INT32_MIN || v > INT32_MAX)
            throw WriteError("coordinate overflow: " + std::to_string(v) + " does not fit signed 32-bit dbu");
        auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
        p.push_back(static_cast<std::uint8_t>(u >> 24));
        p.push_back(static_cast<std::uint8_t>(u >> 16));
        p.push_back(static_cast<std::uint8_t>(u >> 8));
        p.push_back(static_cast<std::uint8_t>(u));
    }

private:
    std::vector<std::uint8_t>& out_;
};

inline void write_transform(RecordWriter& w, const GdsTransform& t) {
    if (!t.reflect_x && t.magnification == 1.0 && t.angle_deg == 0.0) return;
    std::uint8_t strans[2] = {static_cast<std::uint8_t>(t.reflect_x ? 0x80 : 0x00), 0x00};
    w.record(rec::STRANS, 0x01, strans);
    if (t.magnification != 1.0) w.real8s(rec::MAG, {t.magnification});
    if (t.angle_deg != 0.0) w.real8s(rec::ANGLE, {t.angle_deg});
}

constexpr std::size_t kMaxXyPoints = 8190;  // 2-byte record length bound

}  // namespace detail

/// Serializes a library. Timestamps are fixed at zero so output is a pure
/// function of the library contents.
inline std::vector<std::uint8_t> write_library(const GdsLibrary& lib) {
    using namespace detail;
    std::vector<std::uint8_t> out;
    RecordWriter w(out);

    w.i16(rec::HEADER, {600});
    w.i16(rec::BGNLIB, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    w.name(rec::LIBNAME, lib.name);
    w.real8s(rec::UNITS, {lib.units.user_unit_per_dbu, lib.units.meters_per_dbu});

    for (const auto& s : lib.structures) {
        w.i16(rec::BGNSTR, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
        w.name(rec::STRNAME, s.name);
        for (const auto& el : s.elements) {
            std::visit(
                [&](const auto& e) {
                    using T = std::decay_t<decltype(e)>;
                    if constexpr (std::is_same_v<T, GdsBoundary>) {
                        if (e.points.size() + 1 > kMaxXyPoints)
                            throw WriteError("boundary has too many vertices: " +
                                             std::to_string(e.points.size()));
                        w.record(rec::BOUNDARY, 0x00);
                        w.i16(rec::LAYER, {e.layer});
                        w.i16(rec::DATATYPE, {e.datatype});
                        std::vector<Vec2> closed(e.points);
                        closed.push_back(e.points.front());
                        w.xy(closed);
                        w.record(rec::ENDEL, 0x00);
                    } else if constexpr (std::is_same_v<T, GdsPath>) {
                        if (e.points.size() > kMaxXyPoints)
                            throw WriteError("path has too many vertices: " + std::to_string(e.points.size()));
                        w.record(rec::PATH, 0x00);
                        w.i16(rec::LAYER, {e.layer});
                        w.i16(rec::DATATYPE, {e.datatype});
                        if (e.pathtype != 0) w.i16(rec::PATHTYPE, {e.pathtype});
                        if (e.width != 0) {
                            std::vector<std::uint8_t> p;
                            RecordWriter::push_i32(p, e.width);
                            w.record(rec::WIDTH, 0x03, p);
                        }
                        w.xy(e.points);
                        w.record(rec::ENDEL, 0x00);
                    } else if constexpr (std::is_same_v<T, GdsSRef>) {
                        w.record(rec::SREF, 0x00);
                        w.name(rec::SNAME, e.target);
                        write_transform(w, e.transform);
                        w.xy(std::array{e.transform.translate});
                        w.record(rec::ENDEL, 0x00);
                    } else if constexpr (std::is_same_v<T, GdsARef>) {
                        w.record(rec::AREF, 0x00);
                        w.name(rec::SNAME, e.target);
                        write_transform(w, e.transform);
                        w.i16(rec::COLROW, {e.cols, e.rows});
                        Vec2 o = e.transform.translate;
                        w.xy(std::array{o, o + std::int64_t(e.cols) * e.col_step,
                                        o + std::int64_t(e.rows) * e.row_step});
                        w.record(rec::ENDEL, 0x00);
                    } else if constexpr (std::is_same_v<T, GdsOpaqueElement>) {
                        for (const auto& r : e.records) w.record(r.rtype, r.dtype, r.payload);
                    }
                },
                el);
        }
        w.record(rec::ENDSTR, 0x00);
    }
    w.record(rec::ENDLIB, 0x00);
    return out;
}

inline void write_library_file(const GdsLibrary& lib, const std::string& path) {
    auto bytes = write_library(lib);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Layer extraction and merging

/// Keeps the full structure/reference skeleton but only geometry on `key`.
/// TEXT/NODE/BOX elements are dropped; they carry no render geometry.
inline GdsLibrary extract_layer(const GdsLibrary& lib, LayerKey key) {
    GdsLibrary out;
    out.name = lib.name;
    out.units = lib.units;
    out.structures.reserve(lib.structures.size());
    for (const auto& s : lib.structures) {
        GdsStructure copy;
        copy.name = s.name;
        for (const auto& el : s.elements) {
            if (const auto* b = std::get_if<GdsBoundary>(&el)) {
                if (b->key() == key) copy.elements.push_back(el);
            } else if (const auto* p = std::get_if<GdsPath>(&el)) {
                if (p->key() == key) copy.elements.push_back(el);
            } else if (std::holds_alternative<GdsSRef>(el) || std::holds_alternative<GdsARef>(el)) {
                copy.elements.push_back(el);
            }
        }
        out.structures.push_back(std::move(copy));
    }
    return out;
}

namespace detail {

// First structure not referenced by any other structure in the library.
inline const GdsStructure* top_structure(const GdsLibrary& lib) {
    std::map<std::string, bool> referenced;
    for (const auto& s : lib.structures) referenced.emplace(s.name, false);
    for (const auto& s : lib.structures)
        for (const auto& el : s.elements) {
            if (const auto* r = std::get_if<GdsSRef>(&el)) {
                auto it = referenced.find(r->target);
                if (it != referenced.end()) it->second = true;
            } else if (const auto* a = std::get_if<GdsARef>(&el)) {
                auto it = referenced.find(a->target);
                if (it != referenced.end()) it->second = true;
            }
        }
    for (const auto& s : lib.structures)
        if (!referenced[s.name]) return &s;
    return nullptr;
}

}  // namespace detail

/// Imports all structures of `art` into `base` (colliding names get the
/// smallest unique "_ART<n>" suffix) and appends an identity SRef to the art
/// top structure inside `top_cell`.
inline GdsLibrary merge_libraries(const GdsLibrary& base, const GdsLibrary& art,
                                  const std::string& top_cell) {
    double a = base.units.meters_per_dbu, b = art.units.meters_per_dbu;
    if (std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b)))
        throw Error("unit mismatch: base dbu " + std::to_string(a) + " m vs art dbu " +
                    std::to_string(b) + " m");
    if (!base.find(top_cell)) throw Error("missing top_cell in base library: " + top_cell);
    const GdsStructure* art_top = detail::top_structure(art);
    if (!art_top) throw Error("art library has no unreferenced top structure");

    GdsLibrary out = base;
    std::map<std::string, std::string> renames;
    for (const auto& s : art.structures) {
        std::string name = s.name;
        if (out.find(name)) {
            for (int n = 1;; ++n) {
                std::string candidate = s.name + "_ART" + std::to_string(n);
                if (!out.find(candidate) && !art.find(candidate)) {
                    name = candidate;
                    break;
                }
            }
            if (name.size() > 32) throw Error("renamed art structure exceeds 32 bytes: " + name);
            renames[s.name] = name;
        }
    }
    for (const auto& s : art.structures) {
        GdsStructure copy = s;
        if (auto it = renames.find(copy.name); it != renames.end()) copy.name = it->second;
        for (auto& el : copy.elements) {
            if (auto* r = std::get_if<GdsSRef>(&el)) {
                if (auto it = renames.find(r->target); it != renames.end()) r->target = it->second;
            } else if (auto* ar = std::get_if<GdsARef>(&el)) {
                if (auto it = renames.find(ar->target); it != renames.end()) ar->target = it->second;
            }
        }
        out.structures.push_back(std::move(copy));
    }

    std::string art_top_name = art_top->name;
    if (auto it = renames.find(art_top_name); it != renames.end()) art_top_name = it->second;
    for (auto& s : out.structures)
        if (s.name == top_cell) {
            s.elements.push_back(GdsSRef{art_top_name, GdsTransform{}});
            break;
        }
    return out;
}

}  // namespace artistic::gds
