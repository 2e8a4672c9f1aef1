// Renders a small synthetic two-layer scene into a PNG using the tile
// rasterizer and the fixed-point compositor directly — the same pieces the
// CLI wires together, minus any input files.
//
//   tiny_render out.png

#include <cstdint>
#include <iostream>
#include <vector>

#include "artistic/compose.hpp"
#include "artistic/png.hpp"
#include "artistic/raster.hpp"

int main(int argc, char** argv) {
    using namespace artistic;
    const char* out = argc > 1 ? argv[1] : "tiny_render.png";

    // Scene in dbu (1 nm): a diamond on layer 1, a comb of bars on layer 2.
    raster::Scene scene;
    geom::FlatPolygon diamond;
    diamond.layer = {1, 0};
    diamond.vertices = {{16000, 4000}, {28000, 16000}, {16000, 28000}, {4000, 16000}};
    diamond.compute_bbox();
    scene.layers[diamond.layer].push_back(diamond);
    for (int i = 0; i < 5; ++i) {
        geom::FlatPolygon bar;
        bar.layer = {2, 0};
        std::int64_t x = 2000 + i * 6000;
        bar.vertices = {{x, 2000}, {x + 3000, 2000}, {x + 3000, 30000}, {x, 30000}};
        bar.compute_bbox();
        scene.layers[bar.layer].push_back(bar);
    }

    raster::RenderFrame frame;
    frame.window = {{0, 0}, {32000, 32000}};
    frame.nm_per_px = 125.0;  // 256x256 px
    frame.supersample = 4;

    gds::GdsUnits units;
    raster::SampleLattice lat = raster::make_lattice(frame, units);
    raster::TilePlan plan = raster::plan_tiles(lat.out_w, lat.out_h, frame.max_tile_px);
    const raster::Tile tile = plan.at(0, 0);  // small enough for one tile

    std::vector<compose::LayerStyle> styles = {
        {{1, 0}, {80, 200, 255}, 0.85, 0},
        {{2, 0}, {255, 120, 40}, 0.60, 1},
    };
    const std::uint8_t bg[3] = {18, 18, 24};

    compose::Rgba16Tile acc = compose::background_tile16(tile.px0, tile.py0, tile.w, tile.h, bg);
    for (const auto& style : compose::sort_styles(styles)) {
        auto it = scene.layers.find(style.key);
        if (it == scene.layers.end()) continue;
        raster::CoverageTile cov = raster::rasterize_tile(it->second, lat, tile);
        compose::ColorLut16 lut = compose::make_lut16(style);
        compose::composite_over16(acc, compose::colorize16(cov, lut));
    }
    compose::RgbaTile rgba = compose::quantize(acc);

    png::write_png(out, std::uint32_t(rgba.w), std::uint32_t(rgba.h), 4, rgba.px);
    std::cout << out << " (" << rgba.w << "x" << rgba.h << ")\n";
    return 0;
}
