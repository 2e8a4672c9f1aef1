#pragma once

// Orchestration: runs the flow  extract top metal → occupancy → artwork →
// merge → flatten → render tiles → colorize/composite → stitch → PNG/PDF/SVG.
// Each command times its stages, writes whole files atomically (leaving any
// interrupted output suffixed ".partial"), and produces byte-identical
// artifacts regardless of the worker count.

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

#include "artistic/compose.hpp"
#include "artistic/config.hpp"
#include "artistic/gds.hpp"
#include "artistic/geom.hpp"
#include "artistic/meerkat.hpp"
#include "artistic/pdf.hpp"
#include "artistic/png.hpp"
#include "artistic/raster.hpp"

namespace artistic::pipeline {

using config::PipelineConfig;
using gds::GdsLibrary;
using gds::GdsUnits;
using nlohmann::json;

struct StageTime {
    std::string name;
    double seconds = 0.0;
};

struct RunResult {
    std::vector<StageTime> stages;
    std::vector<std::string> artifacts;  // committed output files, in emit order

    double total_seconds() const {
        double s = 0.0;
        for (const StageTime& st : stages) s += st.seconds;
        return s;
    }
};

struct Options {
    int jobs = 0;  // 0 = all logical cores; affects speed only, never bytes
    bool verbose = false;
    std::ostream* log = nullptr;  // defaults to std::cerr
};

inline int resolve_jobs(const Options& opt) {
    if (opt.jobs > 0) return opt.jobs;
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? int(hc) : 1;
}

namespace detail {

inline std::ostream& log_stream(const Options& opt) { return opt.log ? *opt.log : std::cerr; }

template <class F>
auto run_stage(RunResult& rr, const Options& opt, const char* name, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rr.stages.push_back({name, s});
        if (opt.verbose) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f", s);
            log_stream(opt) << "[artistic] stage=" << name << " seconds=" << buf << "\n";
        }
    };
    if constexpr (std::is_void_v<std::invoke_result_t<F&>>) {
        fn();
        record();
    } else {
        auto result = fn();
        record();
        return result;
    }
}

/// Scratch location for spilled/debug tiles; overridable via ARTISTIC_TMPDIR.
inline std::filesystem::path tmp_root() {
    if (const char* env = std::getenv("ARTISTIC_TMPDIR"); env && *env)
        return std::filesystem::path(env);
    return std::filesystem::temp_directory_path();
}

/// Write via "<path>.partial" then rename, so a crash never leaves a
/// half-written file under the final name.
inline void write_atomic(const std::string& path, const void* data, std::size_t size) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(static_cast<const char*>(data), std::streamsize(size));
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

/// On a failed stitch, suffix every image part of the aborted output —
/// the set as a whole is incomplete even if early parts closed cleanly.
inline void salvage_parts(const std::filesystem::path& dir, const std::string& base) {
    std::error_code ec;
    std::filesystem::directory_iterator it(dir, ec), end;
    for (; !ec && it != end; it.increment(ec)) {
        std::string name = it->path().filename().string();
        if (name.starts_with(base + "_part") && name.ends_with(".png"))
            std::filesystem::rename(it->path(), it->path().string() + ".partial", ec);
    }
}

/// Parallel map with strictly ordered consumption: make(i) runs on a worker
/// pool, consume sees items in index order, and at most ~2*jobs finished
/// items are parked, bounding memory regardless of scheduling.
template <class Make, class Consume>
void ordered_loop(std::int64_t count, int jobs, Make&& make, Consume&& consume) {
    using Item = std::invoke_result_t<Make&, std::int64_t>;
    if (count <= 0) return;
    int nthreads = int(std::min<std::int64_t>(std::max(jobs, 1), count));
    if (nthreads == 1) {
        for (std::int64_t i = 0; i < count; ++i) consume(make(i));
        return;
    }

    const std::int64_t window = std::int64_t(nthreads) * 2 + 2;
    std::mutex mu;
    std::condition_variable cv_claim, cv_ready;
    std::map<std::int64_t, Item> parked;
    std::int64_t next_claim = 0, next_emit = 0;
    bool failed = false;
    std::exception_ptr err;

    auto worker = [&] {
        for (;;) {
            std::int64_t i;
            {
                std::unique_lock lk(mu);
                cv_claim.wait(lk, [&] {
                    return failed || next_claim >= count || next_claim - next_emit < window;
                });
                if (failed || next_claim >= count) return;
                i = next_claim++;
            }
            try {
                Item item = make(i);
                std::lock_guard lk(mu);
                parked.emplace(i, std::move(item));
                cv_ready.notify_all();
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failed) {
                    failed = true;
                    err = std::current_exception();
                }
                cv_ready.notify_all();
                cv_claim.notify_all();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);

    while (next_emit < count) {
        std::optional<Item> item;
        {
            std::unique_lock lk(mu);
            cv_ready.wait(lk, [&] { return failed || parked.count(next_emit) != 0; });
            if (failed) break;
            auto node = parked.extract(next_emit);
            item.emplace(std::move(node.mapped()));
        }
        try {
            consume(std::move(*item));
        } catch (...) {
            std::lock_guard lk(mu);
            failed = true;
            if (!err) err = std::current_exception();
            cv_claim.notify_all();
            break;
        }
        {
            std::lock_guard lk(mu);
            ++next_emit;
        }
        cv_claim.notify_all();
    }
    cv_claim.notify_all();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

inline void require_field(bool present, const char* name) {
    if (!present) throw ConfigError(std::string("missing required field: ") + name);
}

inline void check_top_cell(const GdsLibrary& lib, const std::string& top) {
    if (!lib.find(top)) throw ConfigError("top_cell not found in gds_in: " + top);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Artwork stage

struct ArtBundle {
    std::vector<meerkat::ArtPolyomino> shapes;
    Rect64 placement;
    meerkat::ArtRules rules;
    GdsLibrary art_lib;
};

inline ArtBundle make_art(const GdsLibrary& lib, const PipelineConfig& cfg) {
    const config::LogoSection& logo = *cfg.logo;
    meerkat::ArtRules rules = config::art_rules_dbu(logo, lib.units);
    Rect64 placement = config::rect_to_dbu(logo.placement, lib.units);

    png::PngImage img = png::read_png(logo.path);
    meerkat::BitMatrix bw = meerkat::image_to_bw(img, logo.threshold);
    meerkat::InkGrid grid = meerkat::map_logo_to_grid(bw, placement, rules);

    std::vector<geom::FlatPolygon> metal = geom::flatten(lib, cfg.top_cell, cfg.top_metal);
    geom::OccupancyGrid occ = geom::build_occupancy(metal, placement.lo, rules.pitch(),
                                                    grid.cols, grid.rows, rules.keepout);

    ArtBundle out;
    out.shapes = meerkat::generate_art(grid, occ, rules);
    meerkat::DrcReport report = meerkat::check_drc(out.shapes, occ, rules);
    if (!report.clean())
        throw Error("generated artwork fails verification: " + std::to_string(report.total()) +
                    " violations");
    out.placement = placement;
    out.rules = rules;
    out.art_lib = meerkat::export_art_gds(out.shapes, cfg.top_metal, lib.units);
    return out;
}

// ---------------------------------------------------------------------------
// Render stage

struct RenderView {
    Rect64 window;
    raster::SampleLattice lat;
    raster::TilePlan plan;
};

inline RenderView make_view(const raster::Scene& scene, const GdsUnits& units,
                            const config::FrameSection& fr) {
    RenderView v;
    if (fr.window) {
        v.window = config::rect_to_dbu(*fr.window, units);
    } else {
        for (const auto& [key, polys] : scene.layers)
            for (const geom::FlatPolygon& p : polys) v.window.grow(p.bbox);
        if (!v.window.valid()) throw Error("auto render window, but the design has no geometry");
    }
    raster::RenderFrame frame;
    frame.window = v.window;
    frame.nm_per_px = fr.nm_per_px;
    frame.supersample = fr.supersample;
    frame.max_tile_px = fr.max_tile_px;
    frame.max_png_px = fr.max_png_px;
    v.lat = raster::make_lattice(frame, units);
    v.plan = raster::plan_tiles(v.lat.out_w, v.lat.out_h, fr.max_tile_px);
    return v;
}

struct StitchedImage {
    pdf::PageManifest manifest;  // part paths absolute
    std::string manifest_path;
    std::vector<std::string> files;  // parts + manifest json
};

/// Rasterize, colorize and composite every tile of the plan, deliver them in
/// row-major order to the stitcher, and commit PNG parts plus the manifest.
inline StitchedImage render_and_stitch(const raster::Scene& scene, const GdsUnits& units,
                                       const PipelineConfig& cfg, const Options& opt) {
    const config::FrameSection& fr = *cfg.frame;
    RenderView view = make_view(scene, units, fr);
    const int f = fr.downscale;
    const std::int64_t final_w = (view.lat.out_w + f - 1) / f;
    const std::int64_t final_h = (view.lat.out_h + f - 1) / f;

    std::vector<compose::LayerStyle> styles = compose::sort_styles(cfg.stack);
    static const std::vector<geom::FlatPolygon> kNoPolys;
    std::vector<const std::vector<geom::FlatPolygon>*> polys;
    std::vector<compose::ColorLut16> luts;
    std::vector<std::vector<std::vector<std::uint32_t>>> buckets;
    polys.reserve(styles.size());
    luts.reserve(styles.size());
    buckets.reserve(styles.size());
    for (const compose::LayerStyle& s : styles) {
        auto it = scene.layers.find(s.key);
        polys.push_back(it == scene.layers.end() ? &kNoPolys : &it->second);
        luts.push_back(compose::make_lut16(s));
        buckets.push_back(raster::build_tile_buckets(*polys.back(), view.lat, view.plan));
    }

    std::filesystem::path png_path(*cfg.outputs.png_out);
    std::filesystem::path dir = png_path.parent_path();
    if (dir.empty()) dir = ".";
    std::filesystem::create_directories(dir);
    std::string base = png_path.stem().string();
    compose::Stitcher stitcher(dir, base, final_w, final_h, fr.dpi, fr.max_png_px);

    auto make_tile = [&](std::int64_t i) -> compose::RgbaTile {
        raster::Tile t = view.plan.at(i % view.plan.cols, i / view.plan.cols);
        compose::Rgba16Tile acc =
            compose::background_tile16(t.px0, t.py0, t.w, t.h, cfg.background.data());
        for (std::size_t si = 0; si < styles.size(); ++si) {
            const std::vector<std::uint32_t>& idx = buckets[si][std::size_t(i)];
            if (idx.empty()) continue;  // a zero-coverage layer composites to identity
            raster::CoverageTile cov = raster::rasterize_tile(*polys[si], idx, view.lat, t);
            compose::Rgba16Tile layer = compose::colorize16(cov, luts[si]);
            compose::composite_over16(acc, layer);
        }
        if (f > 1) acc = compose::downscale16(acc, f);
        return compose::quantize(acc);
    };

    StitchedImage out;
    try {
        detail::ordered_loop(view.plan.count(), resolve_jobs(opt), make_tile,
                             [&](compose::RgbaTile&& tile) { stitcher.push(tile); });
        out.manifest = stitcher.finish();
    } catch (...) {
        detail::salvage_parts(dir, base);
        throw;
    }

    if (out.manifest.parts.size() == 1) {
        // single part: publish under the requested name itself
        std::filesystem::rename(out.manifest.parts[0].file, png_path);
        out.manifest.parts[0].file = png_path.string();
    }
    for (const pdf::ImagePart& part : out.manifest.parts) out.files.push_back(part.file);

    json mj;
    mj["width_px"] = out.manifest.width_px;
    mj["height_px"] = out.manifest.height_px;
    mj["dpi"] = out.manifest.dpi;
    json parts = json::array();
    for (const pdf::ImagePart& p : out.manifest.parts)
        parts.push_back({{"file", std::filesystem::path(p.file).filename().string()},
                         {"x", p.x},
                         {"y", p.y},
                         {"w", p.w},
                         {"h", p.h}});
    mj["parts"] = std::move(parts);
    out.manifest_path = (dir / (base + ".manifest.json")).string();
    std::string body = mj.dump(2) + "\n";
    detail::write_atomic(out.manifest_path, body.data(), body.size());
    out.files.push_back(out.manifest_path);
    return out;
}

// ---------------------------------------------------------------------------
// Commands

inline RunResult cmd_extract(const PipelineConfig& cfg, const Options& opt = {}) {
    using namespace detail;
    RunResult rr;
    require_field(cfg.outputs.gds_out.has_value(), "outputs.gds_out");
    GdsLibrary lib = run_stage(rr, opt, "parse",
                               [&] { return gds::parse_library_file(cfg.gds_in); });
    check_top_cell(lib, cfg.top_cell);
    GdsLibrary metal =
        run_stage(rr, opt, "extract", [&] { return gds::extract_layer(lib, cfg.top_metal); });
    run_stage(rr, opt, "write", [&] {
        std::vector<std::uint8_t> bytes = gds::write_library(metal);
        write_atomic(*cfg.outputs.gds_out, bytes.data(), bytes.size());
    });
    rr.artifacts.push_back(*cfg.outputs.gds_out);
    return rr;
}

inline RunResult cmd_art(const PipelineConfig& cfg, const Options& opt = {}) {
    using namespace detail;
    RunResult rr;
    require_field(cfg.logo.has_value(), "logo");
    if (!cfg.outputs.gds_out && !cfg.outputs.svg_out)
        throw ConfigError("art command needs outputs.gds_out or outputs.svg_out");
    GdsLibrary lib = run_stage(rr, opt, "parse",
                               [&] { return gds::parse_library_file(cfg.gds_in); });
    check_top_cell(lib, cfg.top_cell);
    ArtBundle art = run_stage(rr, opt, "art", [&] { return make_art(lib, cfg); });
    run_stage(rr, opt, "write", [&] {
        if (cfg.outputs.gds_out) {
            std::vector<std::uint8_t> bytes = gds::write_library(art.art_lib);
            write_atomic(*cfg.outputs.gds_out, bytes.data(), bytes.size());
            rr.artifacts.push_back(*cfg.outputs.gds_out);
        }
        if (cfg.outputs.svg_out) {
            std::string svg = meerkat::export_svg(art.shapes, art.placement, lib.units);
            write_atomic(*cfg.outputs.svg_out, svg.data(), svg.size());
            rr.artifacts.push_back(*cfg.outputs.svg_out);
        }
    });
    return rr;
}

inline RunResult cmd_merge(const PipelineConfig& cfg, const Options& opt = {}) {
    using namespace detail;
    RunResult rr;
    require_field(cfg.logo.has_value(), "logo");
    require_field(cfg.outputs.gds_out.has_value(), "outputs.gds_out");
    GdsLibrary lib = run_stage(rr, opt, "parse",
                               [&] { return gds::parse_library_file(cfg.gds_in); });
    check_top_cell(lib, cfg.top_cell);
    ArtBundle art = run_stage(rr, opt, "art", [&] { return make_art(lib, cfg); });
    GdsLibrary merged = run_stage(rr, opt, "merge", [&] {
        return gds::merge_libraries(lib, art.art_lib, cfg.top_cell);
    });
    run_stage(rr, opt, "write", [&] {
        std::vector<std::uint8_t> bytes = gds::write_library(merged);
        write_atomic(*cfg.outputs.gds_out, bytes.data(), bytes.size());
    });
    rr.artifacts.push_back(*cfg.outputs.gds_out);
    return rr;
}

/// Per-layer coverage tiles as grayscale PNGs, for inspection and debugging.
inline RunResult cmd_render(const PipelineConfig& cfg, const Options& opt = {}) {
    using namespace detail;
    RunResult rr;
    require_field(cfg.frame.has_value(), "frame");
    require_field(!cfg.stack.empty(), "stack");
    std::filesystem::path tiles_dir = cfg.outputs.tiles_dir
                                          ? std::filesystem::path(*cfg.outputs.tiles_dir)
                                          : tmp_root() / "artistic_tiles";
    GdsLibrary lib = run_stage(rr, opt, "parse",
                               [&] { return gds::parse_library_file(cfg.gds_in); });
    check_top_cell(lib, cfg.top_cell);
    raster::Scene scene = run_stage(rr, opt, "flatten", [&] {
        return raster::Scene::from_library(lib, cfg.top_cell);
    });
    RenderView view = make_view(scene, lib.units, *cfg.frame);
    run_stage(rr, opt, "render", [&] {
        std::filesystem::create_directories(tiles_dir);
        static const std::vector<geom::FlatPolygon> kNoPolys;
        for (const compose::LayerStyle& s : compose::sort_styles(cfg.stack)) {
            auto it = scene.layers.find(s.key);
            const std::vector<geom::FlatPolygon>& polys =
                it == scene.layers.end() ? kNoPolys : it->second;
            auto buckets = raster::build_tile_buckets(polys, view.lat, view.plan);
            ordered_loop(
                view.plan.count(), resolve_jobs(opt),
                [&](std::int64_t i) {
                    raster::Tile t = view.plan.at(i % view.plan.cols, i / view.plan.cols);
                    return raster::rasterize_tile(polys, buckets[std::size_t(i)], view.lat, t);
                },
                [&](raster::CoverageTile&& cov) {
                    std::int64_t col = cov.px0 / view.plan.tile_w;
                    std::int64_t row = cov.py0 / view.plan.tile_h;
                    std::string path =
                        (tiles_dir / raster::tile_debug_name(s.key, col, row)).string();
                    {
                        png::PngWriter w(path + ".partial", std::uint32_t(cov.w),
                                         std::uint32_t(cov.h), 1);
                        for (std::int64_t y = 0; y < cov.h; ++y)
                            w.write_row(&cov.cov[std::size_t(y) * std::size_t(cov.w)]);
                        w.finish();
                    }
                    std::filesystem::rename(path + ".partial", path);
                    rr.artifacts.push_back(path);
                });
        }
    });
    return rr;
}

/// Full-stack still image from the library as stored (no artwork stage).
inline RunResult cmd_compose(const PipelineConfig& cfg, const Options& opt = {}) {
    using namespace detail;
    RunResult rr;
    require_field(cfg.frame.has_value(), "frame");
    require_field(!cfg.stack.empty(), "stack");
    require_field(cfg.outputs.png_out.has_value(), "outputs.png_out");
    GdsLibrary lib = run_stage(rr, opt, "parse",
                               [&] { return gds::parse_library_file(cfg.gds_in); });
    check_top_cell(lib, cfg.top_cell);
    raster::Scene scene = run_stage(rr, opt, "flatten", [&] {
        return raster::Scene::from_library(lib, cfg.top_cell);
    });
    StitchedImage img = run_stage(rr, opt, "render", [&] {
        return render_and_stitch(scene, lib.units, cfg, opt);
    });
    for (const std::string& fpath : img.files) rr.artifacts.push_back(fpath);
    if (cfg.outputs.pdf_out) {
        run_stage(rr, opt, "pdf", [&] {
            std::vector<std::uint8_t> bytes = pdf::emit_pdf_bytes(img.manifest);
            write_atomic(*cfg.outputs.pdf_out, bytes.data(), bytes.size());
        });
        rr.artifacts.push_back(*cfg.outputs.pdf_out);
    }
    return rr;
}

/// The all-in-one flow; stages without configured inputs/outputs are skipped.
inline RunResult cmd_pipeline(const PipelineConfig& cfg, const Options& opt = {}) {
    using namespace detail;
    RunResult rr;
    require_field(cfg.frame.has_value(), "frame");
    require_field(!cfg.stack.empty(), "stack");
    require_field(cfg.outputs.png_out.has_value(), "outputs.png_out");

    GdsLibrary lib = run_stage(rr, opt, "parse",
                               [&] { return gds::parse_library_file(cfg.gds_in); });
    check_top_cell(lib, cfg.top_cell);

    std::optional<ArtBundle> art;
    if (cfg.logo) {
        art = run_stage(rr, opt, "art", [&] { return make_art(lib, cfg); });
        lib = run_stage(rr, opt, "merge", [&] {
            GdsLibrary merged = gds::merge_libraries(lib, art->art_lib, cfg.top_cell);
            if (cfg.outputs.gds_out) {
                std::vector<std::uint8_t> bytes = gds::write_library(merged);
                write_atomic(*cfg.outputs.gds_out, bytes.data(), bytes.size());
                rr.artifacts.push_back(*cfg.outputs.gds_out);
            }
            return merged;
        });
    }

    raster::Scene scene = run_stage(rr, opt, "flatten", [&] {
        return raster::Scene::from_library(lib, cfg.top_cell);
    });
    StitchedImage img = run_stage(rr, opt, "render", [&] {
        return render_and_stitch(scene, lib.units, cfg, opt);
    });
    for (const std::string& fpath : img.files) rr.artifacts.push_back(fpath);

    if (cfg.outputs.pdf_out || (cfg.outputs.svg_out && art)) {
        run_stage(rr, opt, "emit", [&] {
            if (cfg.outputs.pdf_out) {
                std::vector<std::uint8_t> bytes = pdf::emit_pdf_bytes(img.manifest);
                write_atomic(*cfg.outputs.pdf_out, bytes.data(), bytes.size());
                rr.artifacts.push_back(*cfg.outputs.pdf_out);
            }
            if (cfg.outputs.svg_out && art) {
                std::string svg = meerkat::export_svg(art->shapes, art->placement, lib.units);
                write_atomic(*cfg.outputs.svg_out, svg.data(), svg.size());
                rr.artifacts.push_back(*cfg.outputs.svg_out);
            }
        });
    }
    return rr;
}

}  // namespace artistic::pipeline
