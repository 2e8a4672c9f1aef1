// Turns a hardcoded glyph into DRC-clean blockwork artwork and prints it as
// SVG on stdout.  Shows the art layer of the library on its own: bitmap ->
// grid -> polyomino tiling -> verified geometry, no files needed.
//
//   blockwork_svg > glyph.svg

#include <iostream>
#include <string_view>
#include <vector>

#include "artistic/meerkat.hpp"

int main() {
    using namespace artistic;

    // 12x12 spiral glyph; '#' cells become ink.
    constexpr std::string_view glyph[] = {
        "############",
        "#..........#",
        "#.########.#",
        "#.#......#.#",
        "#.#.####.#.#",
        "#.#.#..#.#.#",
        "#.#.#..#.#.#",
        "#.#.##.#.#.#",
        "#.#....#.#.#",
        "#.######.#.#",
        "#........#.#",
        "##########.#",
    };

    meerkat::BitMatrix bw;
    bw.cols = int(glyph[0].size());
    bw.rows = int(std::size(glyph));
    bw.bits.assign(std::size_t(bw.cols) * bw.rows, 0);
    for (int r = 0; r < bw.rows; ++r)
        for (int c = 0; c < bw.cols; ++c) bw.set(c, r, glyph[r][c] == '#');

    meerkat::ArtRules rules;
    rules.cell_size = 1000;  // dbu
    rules.gap = 500;
    rules.min_cells = 2;
    rules.max_cells = 4;
    rules.seed = 42;
    rules.density_window = 6;
    rules.max_density = 0.5;

    // One grid cell per glyph pixel: 12 cells at 1.5 µm pitch.
    Rect64 placement{{0, 0}, {12 * rules.pitch(), 12 * rules.pitch()}};
    meerkat::InkGrid grid = meerkat::map_logo_to_grid(bw, placement, rules);

    geom::OccupancyGrid occ;
    occ.origin = placement.lo;
    occ.pitch = rules.pitch();
    occ.cols = grid.cols;
    occ.rows = grid.rows;
    occ.occupied.assign(std::size_t(occ.cols) * occ.rows, 0);

    auto shapes = meerkat::generate_art(grid, occ, rules);
    auto report = meerkat::check_drc(shapes, occ, rules);
    std::cerr << "shapes: " << shapes.size() << ", rule violations: " << report.total() << "\n";

    gds::GdsUnits units;  // default 1 nm per dbu
    std::cout << meerkat::export_svg(shapes, placement, units);
    return report.clean() ? 0 : 1;
}
