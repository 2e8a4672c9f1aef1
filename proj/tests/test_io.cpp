#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "artistic/pdf.hpp"
#include "artistic/png.hpp"
#include "support/oracles.hpp"

using namespace artistic;
namespace fs = std::filesystem;

static fs::path tmpdir() {
    auto d = fs::temp_directory_path() / "artistic_io_tests";
    fs::create_directories(d);
    return d;
}

TEST_CASE("png writes and reads back RGBA pixels exactly") {
    SplitMix64 rng{1};
    std::uint32_t w = 73, h = 41;
    std::vector<std::uint8_t> px(std::size_t(w) * h * 4);
    for (auto& b : px) b = std::uint8_t(rng.below(256));
    auto path = (tmpdir() / "rt_rgba.png").string();
    png::write_png(path, w, h, 4, px);

    auto img = png::read_png(path);
    CHECK(img.width == w);
    CHECK(img.height == h);
    CHECK(img.rgba == px);
}

TEST_CASE("png rgb and grayscale roundtrip through rgba expansion") {
    SplitMix64 rng{2};
    std::uint32_t w = 31, h = 17;

    std::vector<std::uint8_t> rgb(std::size_t(w) * h * 3);
    for (auto& b : rgb) b = std::uint8_t(rng.below(256));
    auto p3 = (tmpdir() / "rt_rgb.png").string();
    png::write_png(p3, w, h, 3, rgb);
    auto img3 = png::read_png(p3);
    for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
        CHECK(img3.rgba[4 * i + 0] == rgb[3 * i + 0]);
        CHECK(img3.rgba[4 * i + 1] == rgb[3 * i + 1]);
        CHECK(img3.rgba[4 * i + 2] == rgb[3 * i + 2]);
        CHECK(img3.rgba[4 * i + 3] == 255);
    }

    std::vector<std::uint8_t> gray(std::size_t(w) * h);
    for (auto& b : gray) b = std::uint8_t(rng.below(256));
    auto p1 = (tmpdir() / "rt_gray.png").string();
    png::write_png(p1, w, h, 1, gray);
    auto img1 = png::read_png(p1);
    for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
        CHECK(img1.rgba[4 * i + 0] == gray[i]);
        CHECK(img1.rgba[4 * i + 1] == gray[i]);
        CHECK(img1.rgba[4 * i + 3] == 255);
    }
}

TEST_CASE("png encoder output is byte-deterministic") {
    SplitMix64 rng{3};
    std::uint32_t w = 64, h = 64;
    std::vector<std::uint8_t> px(std::size_t(w) * h * 3);
    for (auto& b : px) b = std::uint8_t(rng.below(256));
    auto pa = (tmpdir() / "det_a.png").string(), pb = (tmpdir() / "det_b.png").string();
    png::write_png(pa, w, h, 3, px);
    png::write_png(pb, w, h, 3, px);
    auto read_all = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(read_all(pa) == read_all(pb));
}

// 1-bit palette PNG, 2x2 checkerboard (black/white), hand-assembled.
static std::vector<std::uint8_t> tiny_palette_png() {
    std::vector<std::uint8_t> out(png::detail::kSignature, png::detail::kSignature + 8);
    auto chunk = [&](const char* type, std::vector<std::uint8_t> body) {
        png::detail::put_u32(out, std::uint32_t(body.size()));
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), body.begin(), body.end());
        auto crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
        if (!body.empty()) crc = crc32(crc, body.data(), uInt(body.size()));
        png::detail::put_u32(out, std::uint32_t(crc));
    };
    std::vector<std::uint8_t> ihdr;
    png::detail::put_u32(ihdr, 2);
    png::detail::put_u32(ihdr, 2);
    ihdr.insert(ihdr.end(), {1 /*depth*/, 3 /*palette*/, 0, 0, 0});
    chunk("IHDR", ihdr);
    chunk("PLTE", {0, 0, 0, 255, 255, 255});
    // rows (filter 0): row0 = 0b01......, row1 = 0b10......
    std::vector<std::uint8_t> raw = {0, 0x40, 0, 0x80};
    std::vector<std::uint8_t> z(compressBound(uLong(raw.size())));
    uLongf zlen = uLongf(z.size());
    REQUIRE(compress2(z.data(), &zlen, raw.data(), uLong(raw.size()), 6) == Z_OK);
    z.resize(zlen);
    chunk("IDAT", z);
    chunk("IEND", {});
    return out;
}

TEST_CASE("png decoder handles 1-bit palette images") {
    auto path = (tmpdir() / "pal1.png").string();
    {
        auto bytes = tiny_palette_png();
        std::ofstream f(path, std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    }
    auto img = png::read_png(path);
    REQUIRE(img.width == 2);
    REQUIRE(img.height == 2);
    CHECK(img.px(0, 0)[0] == 0);
    CHECK(img.px(1, 0)[0] == 255);
    CHECK(img.px(0, 1)[0] == 255);
    CHECK(img.px(1, 1)[0] == 0);
}

TEST_CASE("png decoder rejects damage") {
    auto path = (tmpdir() / "bad.png").string();
    auto bytes = tiny_palette_png();
    bytes[bytes.size() - 20] ^= 0xFF;  // corrupt IDAT body
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    CHECK_THROWS_AS(png::read_png(path), png::PngError);

    auto missing = (tmpdir() / "nope.png").string();
    CHECK_THROWS_AS(png::read_png(missing), png::PngError);
}

TEST_CASE("pdf page size follows px/dpi*72 within 0.01pt") {
    // 1200x2400 px at 300 dpi -> 288x576 pt
    CHECK(pdf::px_to_points(1200, 300) == doctest::Approx(288.0).epsilon(1e-12));
    CHECK(pdf::px_to_points(2400, 300) == doctest::Approx(576.0).epsilon(1e-12));

    SplitMix64 rng{4};
    for (int i = 0; i < 20; ++i) {
        double px = double(1 + rng.below(100000));
        double dpi = 50.0 + double(rng.below(10000)) / 10.0;
        double want = px / dpi * 72.0;
        CHECK(std::abs(pdf::px_to_points(px, dpi) - want) <= 0.01);
    }
}

TEST_CASE("pdf embeds parts and can be parsed structurally") {
    // two small parts side by side
    auto d = tmpdir();
    std::vector<std::uint8_t> red(16 * 8 * 3), blue(16 * 8 * 3);
    for (std::size_t i = 0; i < 16 * 8; ++i) {
        red[3 * i] = 200;
        blue[3 * i + 2] = 180;
    }
    png::write_png((d / "part0.png").string(), 16, 8, 3, red);
    png::write_png((d / "part1.png").string(), 16, 8, 3, blue);

    pdf::PageManifest m;
    m.width_px = 32;
    m.height_px = 8;
    m.dpi = 72.0;
    m.parts = {{(d / "part0.png").string(), 0, 0, 16, 8}, {(d / "part1.png").string(), 16, 0, 16, 8}};
    auto bytes = pdf::emit_pdf_bytes(m);

    std::string s(bytes.begin(), bytes.end());
    CHECK(s.substr(0, 8) == "%PDF-1.4");
    CHECK(s.find("/MediaBox [0 0 32.0000 8.0000]") != std::string::npos);
    CHECK(s.find("/Im0 Do") != std::string::npos);
    CHECK(s.find("/Im1 Do") != std::string::npos);
    CHECK(s.find("/Predictor 15") != std::string::npos);
    CHECK(s.find("startxref") != std::string::npos);
    CHECK(s.rfind("%%EOF\n") == s.size() - 6);

    // startxref points at the xref table
    auto sx = s.rfind("startxref\n");
    std::size_t xref_at = std::stoul(s.substr(sx + 10));
    CHECK(s.compare(xref_at, 4, "xref") == 0);

    // embedded stream is the PNG's own zlib data, byte for byte
    auto raw = png::read_png_raw((d / "part0.png").string());
    std::string needle(raw.idat.begin(), raw.idat.end());
    CHECK(s.find(needle) != std::string::npos);

    // deterministic bytes
    CHECK(pdf::emit_pdf_bytes(m) == bytes);
}

TEST_CASE("pdf refuses empty manifests and oversized pages") {
    pdf::PageManifest empty;
    empty.width_px = 10;
    empty.height_px = 10;
    CHECK_THROWS_WITH_AS(pdf::emit_pdf_bytes(empty), doctest::Contains("no image parts"), pdf::PdfError);

    auto d = tmpdir();
    std::vector<std::uint8_t> px(4 * 4 * 3, 128);
    png::write_png((d / "big.png").string(), 4, 4, 3, px);
    pdf::PageManifest m;
    m.width_px = 1'000'000;  // 1e6 px / 1 dpi * 72 >> 14400
    m.height_px = 4;
    m.dpi = 1.0;
    m.parts = {{(d / "big.png").string(), 0, 0, 4, 4}};
    CHECK_THROWS_WITH_AS(pdf::emit_pdf_bytes(m), doctest::Contains("increase print dpi"), pdf::PdfError);
}

TEST_CASE("streaming writer matches one-shot writer byte for byte") {
    SplitMix64 rng{5};
    std::uint32_t w = 40, h = 30;
    std::vector<std::uint8_t> px(std::size_t(w) * h * 3);
    for (auto& b : px) b = std::uint8_t(rng.below(256));

    auto pa = (tmpdir() / "oneshot.png").string();
    auto pb = (tmpdir() / "streamed.png").string();
    png::write_png(pa, w, h, 3, px);
    {
        png::PngWriter wr(pb, w, h, 3);
        for (std::uint32_t y = 0; y < h; ++y) wr.write_row(&px[std::size_t(y) * w * 3]);
        wr.finish();
    }
    auto read_all = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(read_all(pa) == read_all(pb));
}
