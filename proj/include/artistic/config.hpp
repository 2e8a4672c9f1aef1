#pragma once

// Strict JSON run configuration: one file describes the whole job (input
// layout, art rules, render frame, layer stack, output paths).  Lengths in
// the file are micrometres; they are converted to database units exactly
// once, against the parsed library's unit record.  Unknown keys are errors.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "artistic/common.hpp"
#include "artistic/compose.hpp"
#include "artistic/gds.hpp"
#include "artistic/meerkat.hpp"
#include "artistic/raster.hpp"

namespace artistic::config {

using compose::LayerStyle;
using gds::GdsUnits;
using gds::LayerKey;
using nlohmann::json;

// Lengths in micrometres; counts and seeds unitless.
struct ArtRulesUm {
    double cell_size = 1.0;
    double gap = 0.5;
    double keepout = 0.0;
    int min_cells = 1;
    int max_cells = 4;
    int density_window = 16;
    double max_density = 1.0;
    std::uint64_t seed = 1;
    double min_width = 0.0;
    double min_spacing = 0.0;
    std::optional<double> max_width;  // absent = unlimited

    friend bool operator==(const ArtRulesUm&, const ArtRulesUm&) = default;
};

struct LogoSection {
    std::string path;                     // absolute after load
    int threshold = 128;                  // luma below this is ink, 0..255
    std::array<double, 4> placement{};    // x0 y0 x1 y1, µm
    ArtRulesUm rules;

    friend bool operator==(const LogoSection&, const LogoSection&) = default;
};

struct FrameSection {
    std::optional<std::array<double, 4>> window;  // absent = fit all geometry
    double nm_per_px = 0.0;                       // required, final pixel pitch
    int supersample = 4;
    std::int64_t max_tile_px = 250'000'000;
    int downscale = 1;  // extra 1/f shrink applied after compositing
    double dpi = 300.0;
    std::int64_t max_png_px = std::int64_t(1) << 30;

    friend bool operator==(const FrameSection&, const FrameSection&) = default;
};

struct OutputSection {
    std::optional<std::string> gds_out;
    std::optional<std::string> png_out;
    std::optional<std::string> pdf_out;
    std::optional<std::string> svg_out;
    std::optional<std::string> tiles_dir;

    friend bool operator==(const OutputSection&, const OutputSection&) = default;
};

struct PipelineConfig {
    std::string gds_in;  // absolute after load
    std::string top_cell;
    LayerKey top_metal;
    std::optional<LogoSection> logo;
    std::optional<FrameSection> frame;
    std::vector<LayerStyle> stack;  // may be empty; render commands require it
    std::array<std::uint8_t, 3> background = {0, 0, 0};
    OutputSection outputs;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// ---------------------------------------------------------------------------
// µm → dbu conversion (exactly once, against the library's unit record)

inline std::int64_t um_to_dbu(double um, const GdsUnits& units) {
    return std::llround(um * 1000.0 / units.nm_per_dbu());
}

inline Rect64 rect_to_dbu(const std::array<double, 4>& r, const GdsUnits& units) {
    return {{um_to_dbu(r[0], units), um_to_dbu(r[1], units)},
            {um_to_dbu(r[2], units), um_to_dbu(r[3], units)}};
}

inline meerkat::ArtRules art_rules_dbu(const LogoSection& logo, const GdsUnits& units) {
    meerkat::ArtRules rules;
    rules.cell_size = um_to_dbu(logo.rules.cell_size, units);
    rules.gap = um_to_dbu(logo.rules.gap, units);
    rules.keepout = um_to_dbu(logo.rules.keepout, units);
    rules.min_cells = logo.rules.min_cells;
    rules.max_cells = logo.rules.max_cells;
    rules.density_window = logo.rules.density_window;
    rules.max_density = logo.rules.max_density;
    rules.seed = logo.rules.seed;
    rules.min_width_proxy = um_to_dbu(logo.rules.min_width, units);
    rules.min_spacing_proxy = um_to_dbu(logo.rules.min_spacing, units);
    if (logo.rules.max_width) rules.max_width_proxy = um_to_dbu(*logo.rules.max_width, units);
    return rules;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string dotted(const std::string& where, const char* key) {
    return where.empty() ? std::string(key) : where + "." + key;
}

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<std::string_view> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (auto a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " +
                              (where.empty() ? "config root" : where));
    }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing required field: " + dotted(where, key));
    return *it;
}

inline const json* optional_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline void expect_object(const json& j, const std::string& name) {
    if (!j.is_object()) throw ConfigError(name + " must be an object");
}

inline double as_number(const json& j, const std::string& name) {
    if (!j.is_number()) throw ConfigError(name + " must be a number");
    return j.get<double>();
}

inline std::int64_t as_integer(const json& j, const std::string& name) {
    if (!j.is_number_integer()) throw ConfigError(name + " must be an integer");
    return j.get<std::int64_t>();
}

inline std::uint64_t as_unsigned(const json& j, const std::string& name) {
    if (!(j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0)))
        throw ConfigError(name + " must be a non-negative integer");
    return j.get<std::uint64_t>();
}

inline std::string as_string(const json& j, const std::string& name) {
    if (!j.is_string()) throw ConfigError(name + " must be a string");
    return j.get<std::string>();
}

inline std::array<std::uint8_t, 3> as_rgb(const json& j, const std::string& name) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("malformed color " + name + ": expected [r, g, b] in 0..255");
    std::array<std::uint8_t, 3> rgb{};
    for (int i = 0; i < 3; ++i) {
        std::int64_t v = j[i].is_number_integer() ? j[i].get<std::int64_t>() : -1;
        if (v < 0 || v > 255)
            throw ConfigError("malformed color " + name + ": expected [r, g, b] in 0..255");
        rgb[std::size_t(i)] = std::uint8_t(v);
    }
    return rgb;
}

inline LayerKey as_layer(const json& j, const std::string& name) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ConfigError(name + " must be [layer, datatype]");
    std::int64_t l = j[0].get<std::int64_t>(), d = j[1].get<std::int64_t>();
    if (l < 0 || l > 32767 || d < 0 || d > 32767)
        throw ConfigError(name + " values must lie in 0..32767");
    return {int(l), int(d)};
}

inline std::array<double, 4> as_rect(const json& j, const std::string& name) {
    if (!j.is_array() || j.size() != 4)
        throw ConfigError(name + " must be [x0, y0, x1, y1] in µm");
    std::array<double, 4> r{};
    for (int i = 0; i < 4; ++i) r[std::size_t(i)] = as_number(j[std::size_t(i)], name);
    if (!(r[2] > r[0]) || !(r[3] > r[1]))
        throw ConfigError(name + " must have positive extent");
    return r;
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
    std::filesystem::path fp(p);
    if (fp.is_relative()) fp = base_dir / fp;
    return fp.lexically_normal().string();
}

inline ArtRulesUm parse_rules(const json& j, const std::string& where) {
    expect_object(j, where);
    check_keys(j, where,
               {"cell_size", "gap", "keepout", "min_cells", "max_cells", "density_window",
                "max_density", "seed", "min_width", "min_spacing", "max_width"});
    ArtRulesUm r;
    if (auto* v = optional_field(j, "cell_size")) r.cell_size = as_number(*v, dotted(where, "cell_size"));
    if (auto* v = optional_field(j, "gap")) r.gap = as_number(*v, dotted(where, "gap"));
    if (auto* v = optional_field(j, "keepout")) r.keepout = as_number(*v, dotted(where, "keepout"));
    if (auto* v = optional_field(j, "min_cells")) r.min_cells = int(as_integer(*v, dotted(where, "min_cells")));
    if (auto* v = optional_field(j, "max_cells")) r.max_cells = int(as_integer(*v, dotted(where, "max_cells")));
    if (auto* v = optional_field(j, "density_window"))
        r.density_window = int(as_integer(*v, dotted(where, "density_window")));
    if (auto* v = optional_field(j, "max_density")) r.max_density = as_number(*v, dotted(where, "max_density"));
    if (auto* v = optional_field(j, "seed")) r.seed = as_unsigned(*v, dotted(where, "seed"));
    if (auto* v = optional_field(j, "min_width")) r.min_width = as_number(*v, dotted(where, "min_width"));
    if (auto* v = optional_field(j, "min_spacing")) r.min_spacing = as_number(*v, dotted(where, "min_spacing"));
    if (auto* v = optional_field(j, "max_width")) r.max_width = as_number(*v, dotted(where, "max_width"));

    if (!(r.cell_size > 0)) throw ConfigError(dotted(where, "cell_size") + " must be positive");
    if (!(r.gap > 0)) throw ConfigError(dotted(where, "gap") + " must be positive");
    if (r.keepout < 0) throw ConfigError(dotted(where, "keepout") + " must be non-negative");
    if (r.min_cells < 1 || r.max_cells > 4 || r.min_cells > r.max_cells)
        throw ConfigError(dotted(where, "min_cells") +
                          "/max_cells must satisfy 1 <= min_cells <= max_cells <= 4");
    if (r.density_window < 1)
        throw ConfigError(dotted(where, "density_window") + " must be at least 1");
    if (!(r.max_density > 0.0) || r.max_density > 1.0)
        throw ConfigError(dotted(where, "max_density") + " must be in (0, 1]");
    return r;
}

inline LogoSection parse_logo(const json& j, const std::filesystem::path& base_dir) {
    const std::string where = "logo";
    expect_object(j, where);
    check_keys(j, where, {"path", "threshold", "placement", "rules"});
    LogoSection logo;
    logo.path = resolve_path(as_string(require(j, "path", where), "logo.path"), base_dir);
    if (auto* v = optional_field(j, "threshold")) {
        std::int64_t t = as_integer(*v, "logo.threshold");
        if (t < 0 || t > 255) throw ConfigError("logo.threshold must lie in 0..255");
        logo.threshold = int(t);
    }
    logo.placement = as_rect(require(j, "placement", where), "logo.placement");
    if (auto* v = optional_field(j, "rules")) logo.rules = parse_rules(*v, "logo.rules");
    return logo;
}

inline FrameSection parse_frame(const json& j) {
    const std::string where = "frame";
    expect_object(j, where);
    check_keys(j, where, {"window", "nm_per_px", "supersample", "max_tile_px", "downscale",
                          "dpi", "max_png_px"});
    FrameSection f;
    if (auto* v = optional_field(j, "window")) {
        if (v->is_string()) {
            if (v->get<std::string>() != "auto")
                throw ConfigError("frame.window must be [x0, y0, x1, y1] in µm or \"auto\"");
        } else {
            f.window = as_rect(*v, "frame.window");
        }
    }
    f.nm_per_px = as_number(require(j, "nm_per_px", where), "frame.nm_per_px");
    if (!(f.nm_per_px > 0)) throw ConfigError("frame.nm_per_px must be positive");
    if (auto* v = optional_field(j, "supersample")) f.supersample = int(as_integer(*v, "frame.supersample"));
    if (f.supersample != 1 && f.supersample != 2 && f.supersample != 4 && f.supersample != 8)
        throw ConfigError("frame.supersample must be 1, 2, 4 or 8");
    if (auto* v = optional_field(j, "max_tile_px")) f.max_tile_px = as_integer(*v, "frame.max_tile_px");
    if (f.max_tile_px < 64) throw ConfigError("frame.max_tile_px must be at least 64");
    if (auto* v = optional_field(j, "downscale")) f.downscale = int(as_integer(*v, "frame.downscale"));
    if (f.downscale != 1 && f.downscale != 2 && f.downscale != 4 && f.downscale != 8)
        throw ConfigError("frame.downscale must be 1, 2, 4 or 8");
    if (auto* v = optional_field(j, "dpi")) f.dpi = as_number(*v, "frame.dpi");
    if (!(f.dpi > 0)) throw ConfigError("frame.dpi must be positive");
    if (auto* v = optional_field(j, "max_png_px")) f.max_png_px = as_integer(*v, "frame.max_png_px");
    if (f.max_png_px < 1) throw ConfigError("frame.max_png_px must be positive");
    return f;
}

inline std::vector<LayerStyle> parse_stack(const json& j) {
    if (!j.is_array()) throw ConfigError("stack must be a list of layer styles");
    std::vector<LayerStyle> stack;
    stack.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "stack[" + std::to_string(i) + "]";
        const json& e = j[i];
        expect_object(e, where);
        check_keys(e, where, {"layer", "color", "opacity", "z_order"});
        LayerStyle s;
        s.key = as_layer(require(e, "layer", where), dotted(where, "layer"));
        if (auto* v = optional_field(e, "color")) s.color = as_rgb(*v, dotted(where, "color"));
        if (auto* v = optional_field(e, "opacity")) {
            s.opacity = as_number(*v, dotted(where, "opacity"));
            if (!(s.opacity >= 0.0 && s.opacity <= 1.0))
                throw ConfigError(dotted(where, "opacity") + " must lie in [0, 1]");
        }
        s.z_order = int(i);
        if (auto* v = optional_field(e, "z_order")) s.z_order = int(as_integer(*v, dotted(where, "z_order")));
        stack.push_back(s);
    }
    try {
        compose::sort_styles(stack);  // validates z_order uniqueness
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return stack;
}

inline OutputSection parse_outputs(const json& j, const std::filesystem::path& base_dir) {
    const std::string where = "outputs";
    expect_object(j, where);
    check_keys(j, where, {"gds_out", "png_out", "pdf_out", "svg_out", "tiles_dir"});
    OutputSection out;
    auto grab = [&](const char* key, std::optional<std::string>& slot) {
        if (auto* v = optional_field(j, key))
            slot = resolve_path(as_string(*v, dotted(where, key)), base_dir);
    };
    grab("gds_out", out.gds_out);
    grab("png_out", out.png_out);
    grab("pdf_out", out.pdf_out);
    grab("svg_out", out.svg_out);
    grab("tiles_dir", out.tiles_dir);
    return out;
}

}  // namespace detail

/// Parse a configuration document. Relative paths resolve against base_dir.
inline PipelineConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    using namespace detail;
    expect_object(j, "config root");
    check_keys(j, "",
               {"gds_in", "top_cell", "top_metal", "logo", "frame", "stack", "background",
                "outputs"});
    PipelineConfig cfg;
    cfg.gds_in = resolve_path(as_string(require(j, "gds_in", ""), "gds_in"), base_dir);
    cfg.top_cell = as_string(require(j, "top_cell", ""), "top_cell");
    if (cfg.top_cell.empty()) throw ConfigError("top_cell must not be empty");
    cfg.top_metal = as_layer(require(j, "top_metal", ""), "top_metal");
    if (auto* v = optional_field(j, "logo")) cfg.logo = parse_logo(*v, base_dir);
    if (auto* v = optional_field(j, "frame")) cfg.frame = parse_frame(*v);
    if (auto* v = optional_field(j, "stack")) cfg.stack = parse_stack(*v);
    if (auto* v = optional_field(j, "background")) cfg.background = as_rgb(*v, "background");
    if (auto* v = optional_field(j, "outputs")) cfg.outputs = parse_outputs(*v, base_dir);
    return cfg;
}

/// Load, parse and validate a config file; checks that input files exist.
inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    auto base = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    PipelineConfig cfg = parse_config(j, base);
    if (!std::filesystem::exists(cfg.gds_in))
        throw ConfigError("gds_in does not exist: " + cfg.gds_in);
    if (cfg.logo && !std::filesystem::exists(cfg.logo->path))
        throw ConfigError("logo.path does not exist: " + cfg.logo->path);
    return cfg;
}

// ---------------------------------------------------------------------------
// Serialization (every field explicit, so load(serialize(c)) == c)

inline json to_json(const PipelineConfig& cfg) {
    json j;
    j["gds_in"] = cfg.gds_in;
    j["top_cell"] = cfg.top_cell;
    j["top_metal"] = {cfg.top_metal.layer, cfg.top_metal.datatype};
    j["background"] = {cfg.background[0], cfg.background[1], cfg.background[2]};
    if (cfg.logo) {
        const LogoSection& lg = *cfg.logo;
        json r;
        r["cell_size"] = lg.rules.cell_size;
        r["gap"] = lg.rules.gap;
        r["keepout"] = lg.rules.keepout;
        r["min_cells"] = lg.rules.min_cells;
        r["max_cells"] = lg.rules.max_cells;
        r["density_window"] = lg.rules.density_window;
        r["max_density"] = lg.rules.max_density;
        r["seed"] = lg.rules.seed;
        r["min_width"] = lg.rules.min_width;
        r["min_spacing"] = lg.rules.min_spacing;
        if (lg.rules.max_width) r["max_width"] = *lg.rules.max_width;
        j["logo"] = {{"path", lg.path},
                     {"threshold", lg.threshold},
                     {"placement", lg.placement},
                     {"rules", std::move(r)}};
    }
    if (cfg.frame) {
        const FrameSection& f = *cfg.frame;
        json w;
        if (f.window)
            w = *f.window;
        else
            w = "auto";
        j["frame"] = {{"window", std::move(w)},     {"nm_per_px", f.nm_per_px},
                      {"supersample", f.supersample}, {"max_tile_px", f.max_tile_px},
                      {"downscale", f.downscale},     {"dpi", f.dpi},
                      {"max_png_px", f.max_png_px}};
    }
    if (!cfg.stack.empty()) {
        json arr = json::array();
        for (const LayerStyle& s : cfg.stack)
            arr.push_back({{"layer", {s.key.layer, s.key.datatype}},
                           {"color", {s.color[0], s.color[1], s.color[2]}},
                           {"opacity", s.opacity},
                           {"z_order", s.z_order}});
        j["stack"] = std::move(arr);
    }
    {
        json out;
        auto put = [&](const char* key, const std::optional<std::string>& slot) {
            if (slot) out[key] = *slot;
        };
        put("gds_out", cfg.outputs.gds_out);
        put("png_out", cfg.outputs.png_out);
        put("pdf_out", cfg.outputs.pdf_out);
        put("svg_out", cfg.outputs.svg_out);
        put("tiles_dir", cfg.outputs.tiles_dir);
        if (!out.empty()) j["outputs"] = std::move(out);
    }
    return j;
}

inline std::string serialize_config(const PipelineConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

inline void save_config(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << serialize_config(cfg);
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace artistic::config
