#pragma once

// Single-page PDF 1.4 container for print. Image parts are embedded
// losslessly by reusing each part PNG's zlib stream as a FlateDecode image
// XObject with PNG predictors — no recompression, no resampling, no
// timestamps (output is a pure function of the inputs).

#include <cmath>

#include "artistic/png.hpp"

namespace artistic::pdf {

struct PdfError : Error {
    using Error::Error;
};

struct ImagePart {
    std::string file;  // path to an 8-bit RGB or grayscale PNG
    std::int64_t x = 0, y = 0;  // top-left placement in final-image pixels
    std::uint32_t w = 0, h = 0;
};

struct PageManifest {
    std::int64_t width_px = 0, height_px = 0;
    double dpi = 300.0;
    std::vector<ImagePart> parts;
};

constexpr double kMaxPagePoints = 14400.0;  // PDF dimension limit

inline double px_to_points(double px, double dpi) { return px / dpi * 72.0; }

namespace detail {

inline std::string fmt_pt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

class ObjWriter {
public:
    explicit ObjWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    int begin_obj() {
        offsets_.push_back(out_.size());
        int id = int(offsets_.size());
        text(std::to_string(id) + " 0 obj\n");
        return id;
    }
    void end_obj() { text("endobj\n"); }
    void text(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    std::size_t size() const { return out_.size(); }
    const std::vector<std::size_t>& offsets() const { return offsets_; }

private:
    std::vector<std::uint8_t>& out_;
    std::vector<std::size_t> offsets_;
};

}  // namespace detail

/// Lays out every part at its exact pixel offset; page size = pixels/dpi·72pt.
inline std::vector<std::uint8_t> emit_pdf_bytes(const PageManifest& m) {
    if (m.parts.empty()) throw PdfError("no image parts to embed");
    if (!(m.dpi > 0)) throw PdfError("dpi must be positive");

    double page_w = px_to_points(double(m.width_px), m.dpi);
    double page_h = px_to_points(double(m.height_px), m.dpi);
    if (page_w > kMaxPagePoints || page_h > kMaxPagePoints)
        throw PdfError("page " + detail::fmt_pt(page_w) + "x" + detail::fmt_pt(page_h) +
                       " pt exceeds the 14400-point PDF limit; increase print dpi");

    std::vector<std::uint8_t> out;
    detail::ObjWriter w(out);
    w.text("%PDF-1.4\n%\xE2\xE3\xCF\xD3\n");

    // 1: catalog, 2: pages, 3: page, 4: contents, 5..: images
    w.begin_obj();
    w.text("<< /Type /Catalog /Pages 2 0 R >>\n");
    w.end_obj();
    w.begin_obj();
    w.text("<< /Type /Pages /Kids [3 0 R] /Count 1 >>\n");
    w.end_obj();

    std::string xobjects;
    for (std::size_t i = 0; i < m.parts.size(); ++i)
        xobjects += " /Im" + std::to_string(i) + " " + std::to_string(5 + i) + " 0 R";
    w.begin_obj();
    w.text("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + detail::fmt_pt(page_w) + " " +
           detail::fmt_pt(page_h) + "] /Resources << /XObject <<" + xobjects +
           " >> >> /Contents 4 0 R >>\n");
    w.end_obj();

    std::string content;
    for (std::size_t i = 0; i < m.parts.size(); ++i) {
        const auto& p = m.parts[i];
        double x_pt = px_to_points(double(p.x), m.dpi);
        double y_pt = px_to_points(double(m.height_px - p.y - std::int64_t(p.h)), m.dpi);
        double w_pt = px_to_points(double(p.w), m.dpi);
        double h_pt = px_to_points(double(p.h), m.dpi);
        content += "q\n" + detail::fmt_pt(w_pt) + " 0 0 " + detail::fmt_pt(h_pt) + " " +
                   detail::fmt_pt(x_pt) + " " + detail::fmt_pt(y_pt) + " cm\n/Im" + std::to_string(i) +
                   " Do\nQ\n";
    }
    w.begin_obj();
    w.text("<< /Length " + std::to_string(content.size()) + " >>\nstream\n" + content + "endstream\n");
    w.end_obj();

    for (const auto& p : m.parts) {
        png::PngRaw raw = png::read_png_raw(p.file);
        if (raw.bit_depth != 8 || (raw.color_type != 2 && raw.color_type != 0))
            throw PdfError("part must be an 8-bit RGB or grayscale PNG: " + p.file);
        if (raw.width != p.w || raw.height != p.h)
            throw PdfError("part dimensions disagree with manifest: " + p.file);
        int colors = raw.color_type == 2 ? 3 : 1;
        w.begin_obj();
        w.text("<< /Type /XObject /Subtype /Image /Width " + std::to_string(raw.width) + " /Height " +
               std::to_string(raw.height) + " /ColorSpace /Device" +
               (colors == 3 ? std::string("RGB") : std::string("Gray")) +
               " /BitsPerComponent 8 /Filter /FlateDecode /DecodeParms << /Predictor 15 /Colors " +
               std::to_string(colors) + " /BitsPerComponent 8 /Columns " + std::to_string(raw.width) +
               " >> /Length " + std::to_string(raw.idat.size()) + " >>\nstream\n");
        w.bytes(raw.idat);
        w.text("\nendstream\n");
        w.end_obj();
    }

    std::size_t xref_at = w.size();
    int nobj = int(w.offsets().size());
    std::string xref = "xref\n0 " + std::to_string(nobj + 1) + "\n0000000000 65535 f \n";
    for (auto off : w.offsets()) {
        char line[32];
        std::snprintf(line, sizeof line, "%010zu 00000 n \n", off);
        xref += line;
    }
    w.text(xref);
    w.text("trailer\n<< /Size " + std::to_string(nobj + 1) +
           " /Root 1 0 R >>\nstartxref\n" + std::to_string(xref_at) + "\n%%EOF\n");
    return out;
}

inline void emit_pdf(const PageManifest& m, const std::string& path) {
    auto bytes = emit_pdf_bytes(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace artistic::pdf
