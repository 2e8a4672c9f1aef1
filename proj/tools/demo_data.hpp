#pragma once

// Deterministic bundled demo: a small synthetic two-metal chip with cell
// rows, routing and a free corner for artwork, plus a 16x16 logo bitmap and
// a ready-to-run job file.  Shared by the demo generator, the test suite and
// the acceptance run.

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "artistic/gds.hpp"
#include "artistic/png.hpp"

namespace artistic::demo {

// All coordinates in dbu with the default 1 nm grid; 1 µm = 1000 dbu.
inline gds::GdsLibrary make_demo_library() {
    using gds::GdsARef;
    using gds::GdsBoundary;
    using gds::GdsPath;
    using gds::GdsSRef;
    using gds::GdsStructure;

    auto rect = [](int layer, std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1) {
        GdsBoundary b;
        b.layer = layer;
        b.points = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
        return b;
    };

    gds::GdsLibrary lib;
    lib.name = "DEMOCHIP";

    GdsStructure cell;
    cell.name = "CELL";
    cell.elements.push_back(rect(1, 0, 0, 3000, 500));        // diffusion-ish base strip
    cell.elements.push_back(rect(1, 200, 700, 1400, 2600));   // left gate block
    cell.elements.push_back(rect(1, 1800, 700, 2800, 2200));  // right gate block
    cell.elements.push_back(rect(2, 400, 1000, 900, 3000));   // local metal stub
    lib.structures.push_back(cell);

    GdsStructure row;
    row.name = "ROW";
    GdsARef cells;
    cells.target = "CELL";
    cells.cols = 8;
    cells.rows = 1;
    cells.col_step = {3600, 0};
    cells.row_step = {0, 3600};
    row.elements.push_back(cells);
    row.elements.push_back(rect(2, 0, 3200, 8 * 3600 - 600, 3450));  // row power rail
    lib.structures.push_back(row);

    GdsStructure chip;
    chip.name = "CHIP";
    chip.elements.push_back(rect(0, 0, 0, 40000, 40000));  // die outline / substrate
    for (int r = 0; r < 6; ++r) {
        GdsSRef sr;
        sr.target = "ROW";
        sr.transform.translate = {2000, 2500 + r * 4200};
        if (r % 2 == 1) {
            sr.transform.reflect_x = true;
            sr.transform.translate.y += 3450;  // flipped rows abut their rails
        }
        chip.elements.push_back(sr);
    }
    // top-metal routing spines, two path styles
    for (int i = 0; i < 5; ++i) {
        GdsPath p;
        p.layer = 2;
        p.width = 600;
        p.pathtype = i % 2;
        p.points = {{3000 + i * 5200, 29000}, {3000 + i * 5200, 36500}, {9000 + i * 5200, 36500}};
        chip.elements.push_back(p);
    }
    chip.elements.push_back(rect(2, 2000, 38000, 38000, 38800));  // top strap
    chip.elements.push_back(rect(2, 30500, 4000, 31300, 26000));  // spine near the art corner
    lib.structures.push_back(chip);
    return lib;
}

/// 16x16 black-on-white glyph; '#' cells are ink.
inline const std::array<const char*, 16>& demo_logo_rows() {
    static const std::array<const char*, 16> rows = {
        "................",
        "....##....##....",
        "...####..####...",
        "...####..####...",
        "....########....",
        "...##########...",
        "..####....####..",
        "..##..####..##..",
        "..##..####..##..",
        "..####....####..",
        "...##########...",
        "....########....",
        ".....######.....",
        "......####......",
        ".......##.......",
        "................",
    };
    return rows;
}

inline void write_demo_logo_png(const std::string& path) {
    const auto& rows = demo_logo_rows();
    std::vector<std::uint8_t> rgba(16 * 16 * 4, 255);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (rows[std::size_t(y)][x] == '#') {
                std::uint8_t* px = &rgba[4 * std::size_t(y * 16 + x)];
                px[0] = px[1] = px[2] = 0;
            }
    png::write_png(path, 16, 16, 4, rgba);
}

inline nlohmann::json demo_config_json() {
    // paths deliberately relative: they resolve against the json's location
    nlohmann::json j;
    j["gds_in"] = "demo_chip.gds";
    j["top_cell"] = "CHIP";
    j["top_metal"] = {2, 0};
    j["logo"] = {{"path", "logo.png"},
                 {"placement", {26.0, 4.0, 35.6, 13.6}},
                 {"rules",
                  {{"cell_size", 0.4},
                   {"gap", 0.2},
                   {"keepout", 0.1},
                   {"min_cells", 2},
                   {"density_window", 8},
                   {"max_density", 0.55},
                   {"seed", 7},
                   {"min_width", 0.4},
                   {"min_spacing", 0.2}}}};
    j["frame"] = {{"window", "auto"}, {"nm_per_px", 50.0}, {"supersample", 2}};
    j["stack"] = {{{"layer", {0, 0}}, {"color", {34, 38, 46}}, {"opacity", 1.0}},
                  {{"layer", {1, 0}}, {"color", {64, 160, 150}}, {"opacity", 0.9}},
                  {{"layer", {2, 0}}, {"color", {235, 170, 60}}, {"opacity", 0.85}}};
    j["background"] = {12, 12, 14};
    j["outputs"] = {{"gds_out", "out/demo_merged.gds"},
                    {"png_out", "out/demo.png"},
                    {"pdf_out", "out/demo.pdf"},
                    {"svg_out", "out/demo_art.svg"}};
    return j;
}

/// Write demo_chip.gds, logo.png and artistic.json into dir; returns the
/// path of the job file.
inline std::string write_demo(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    gds::write_library_file(make_demo_library(), (dir / "demo_chip.gds").string());
    write_demo_logo_png((dir / "logo.png").string());
    std::string cfg_path = (dir / "artistic.json").string();
    std::ofstream out(cfg_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + cfg_path);
    out << demo_config_json().dump(2) << "\n";
    if (!out) throw IoError("write failed: " + cfg_path);
    return cfg_path;
}

}  // namespace artistic::demo
