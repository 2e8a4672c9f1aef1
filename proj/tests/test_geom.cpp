#include "doctest.h"

#include <algorithm>

#include "artistic/geom.hpp"
#include "support/oracles.hpp"

using namespace artistic;
using namespace artistic::gds;
using namespace artistic::geom;

TEST_CASE("apply_transform worked examples") {
    CHECK(apply_transform({123, 456}, GdsTransform{}) == Vec2{123, 456});

    GdsTransform r90;
    r90.angle_deg = 90.0;
    CHECK(apply_transform({1000, 0}, r90) == Vec2{0, 1000});

    // reflect (1,2)->(1,-2), rotate 90 -> (2,1), translate (10,20) -> (12,21)
    GdsTransform t;
    t.reflect_x = true;
    t.angle_deg = 90.0;
    t.translate = {10, 20};
    CHECK(apply_transform({1, 2}, t) == Vec2{12, 21});
}

TEST_CASE("right-angle transforms stay exactly integral") {
    SplitMix64 rng{42};
    for (int i = 0; i < 500; ++i) {
        GdsTransform t;
        t.reflect_x = rng.below(2) == 1;
        t.angle_deg = 90.0 * double(rng.below(4));
        t.translate = {std::int64_t(rng.below(2001)) - 1000, std::int64_t(rng.below(2001)) - 1000};
        Vec2 p{std::int64_t(rng.below(20001)) - 10000, std::int64_t(rng.below(20001)) - 10000};
        DVec2 exact = to_affine(t).apply(p);
        CHECK(exact.x == double(round_away(exact.x)));
        CHECK(exact.y == double(round_away(exact.y)));
    }
}

static std::vector<Vec2> sorted_verts(const FlatPolygon& p) {
    auto v = p.vertices;
    std::sort(v.begin(), v.end());
    return v;
}

TEST_CASE("path expansion worked examples") {
    GdsPath p;
    p.layer = 1;
    p.width = 100;
    p.points = {{0, 0}, {1000, 0}};

    SUBCASE("flush ends give exact rectangle") {
        p.pathtype = 0;
        auto polys = path_to_polygon(p);
        REQUIRE(polys.size() == 1);
        CHECK(sorted_verts(polys[0]) ==
              std::vector<Vec2>{{0, -50}, {0, 50}, {1000, -50}, {1000, 50}});
        CHECK(polys[0].bbox == Rect64{{0, -50}, {1000, 50}});
    }
    SUBCASE("extended ends add half width each side") {
        p.pathtype = 2;
        auto polys = path_to_polygon(p);
        REQUIRE(polys.size() == 1);
        CHECK(polys[0].bbox == Rect64{{-50, -50}, {1050, 50}});
    }
    SUBCASE("45 degree segment offsets round to 35") {
        p.pathtype = 0;
        p.points = {{0, 0}, {1000, 1000}};
        auto polys = path_to_polygon(p);
        REQUIRE(polys.size() == 1);
        // normals are (∓50/√2, ±50/√2) ≈ (∓35.36, ±35.36) → (∓35, ±35)
        CHECK(sorted_verts(polys[0]) ==
              std::vector<Vec2>{{-35, 35}, {35, -35}, {965, 1035}, {1035, 965}});
    }
    SUBCASE("round caps produce 16-gon halves") {
        p.pathtype = 1;
        auto polys = path_to_polygon(p);
        REQUIRE(polys.size() == 1);
        // 2 side points per side + 7 interior cap points per cap
        CHECK(polys[0].vertices.size() == 4 + 14);
        // cap extremes reach half-width beyond the endpoints
        CHECK(polys[0].bbox == Rect64{{-50, -50}, {1050, 50}});
        // all cap vertices lie within half-width of an endpoint
        for (auto v : polys[0].vertices) {
            double dx0 = std::hypot(double(v.x - 0), double(v.y));
            double dx1 = std::hypot(double(v.x - 1000), double(v.y));
            CHECK(std::min(dx0, dx1) <= 50.0 + 0.51);
        }
    }
    SUBCASE("duplicate consecutive points are skipped") {
        p.points = {{0, 0}, {0, 0}, {1000, 0}};
        auto polys = path_to_polygon(p);
        REQUIRE(polys.size() == 1);
        CHECK(polys[0].bbox == Rect64{{0, -50}, {1000, 50}});
        p.points = {{5, 5}, {5, 5}};
        CHECK(path_to_polygon(p).empty());
    }
    SUBCASE("miter cap bevels sharp joints") {
        // hairpin: nearly reversing direction would miter to infinity
        p.points = {{0, 0}, {1000, 0}, {0, 10}};
        auto polys = path_to_polygon(p);
        REQUIRE(polys.size() == 1);
        for (auto v : polys[0].vertices) {
            CHECK(v.x <= 1000 + 2 * p.width);
            CHECK(v.x >= -2 * p.width);
        }
    }
}

static GdsBoundary rect(int layer, Vec2 lo, Vec2 hi) {
    GdsBoundary b;
    b.layer = layer;
    b.points = {lo, {hi.x, lo.y}, hi, {lo.x, hi.y}};
    return b;
}

TEST_CASE("flatten worked examples") {
    SUBCASE("single cell single rect") {
        GdsLibrary lib;
        lib.structures.resize(1);
        lib.structures[0].name = "A";
        lib.structures[0].elements = {rect(5, {0, 0}, {10, 20})};
        auto flat = flatten(lib, "A");
        REQUIRE(flat.size() == 1);
        CHECK(flat[0].layer == LayerKey{5, 0});
        CHECK(flat[0].bbox == Rect64{{0, 0}, {10, 20}});
    }

    SUBCASE("ARef 2x3 emits six instances at lattice points") {
        GdsLibrary lib;
        lib.structures.resize(2);
        lib.structures[0].name = "LEAF";
        lib.structures[0].elements = {rect(1, {0, 0}, {10, 10})};
        lib.structures[1].name = "TOP";
        GdsARef a;
        a.target = "LEAF";
        a.cols = 2;
        a.rows = 3;
        a.col_step = {100, 0};
        a.row_step = {0, 200};
        a.transform.translate = {1000, 2000};
        lib.structures[1].elements = {a};

        auto flat = flatten(lib, "TOP");
        REQUIRE(flat.size() == 6);
        std::vector<Vec2> los;
        for (const auto& f : flat) los.push_back(f.bbox.lo);
        std::sort(los.begin(), los.end());
        std::vector<Vec2> want;
        for (int c = 0; c < 2; ++c)
            for (int r = 0; r < 3; ++r) want.push_back({1000 + 100 * c, 2000 + 200 * r});
        std::sort(want.begin(), want.end());
        CHECK(los == want);
    }

    SUBCASE("two nested 90-degree refs equal one 180-degree placement") {
        GdsLibrary lib;
        lib.structures.resize(4);
        lib.structures[0].name = "LEAF";
        lib.structures[0].elements = {rect(1, {3, 7}, {41, 19})};
        GdsSRef inner;
        inner.target = "LEAF";
        inner.transform.angle_deg = 90.0;
        inner.transform.translate = {11, -5};
        lib.structures[1].name = "MID";
        lib.structures[1].elements = {inner};
        GdsSRef outer;
        outer.target = "MID";
        outer.transform.angle_deg = 90.0;
        outer.transform.translate = {-2, 9};
        lib.structures[2].name = "TOPA";
        lib.structures[2].elements = {outer};
        // manual composition: rotate(90)∘[T(11,-5)∘rotate(90)] = T(R90·(11,-5))·R180
        // placed at (-2,9): translate = (-2,9) + R90·(11,-5) = (-2+5, 9+11) = (3,20)
        GdsSRef manual;
        manual.target = "LEAF";
        manual.transform.angle_deg = 180.0;
        manual.transform.translate = {3, 20};
        lib.structures[3].name = "TOPB";
        lib.structures[3].elements = {manual};

        auto fa = flatten(lib, "TOPA");
        auto fb = flatten(lib, "TOPB");
        REQUIRE(fa.size() == 1);
        REQUIRE(fb.size() == 1);
        CHECK(sorted_verts(fa[0]) == sorted_verts(fb[0]));
    }
}

TEST_CASE("flatten detects dangling references and cycles") {
    GdsLibrary lib;
    lib.structures.resize(2);
    lib.structures[0].name = "A";
    lib.structures[0].elements = {GdsSRef{"B", {}}};
    lib.structures[1].name = "B";
    lib.structures[1].elements = {GdsSRef{"A", {}}};

    CHECK_THROWS_WITH_AS(flatten(lib, "NOPE"), doctest::Contains("dangling reference"), GeomError);
    CHECK_THROWS_WITH_AS(flatten(lib, "A"), doctest::Contains("reference cycle"), GeomError);

    GdsLibrary dangle;
    dangle.structures.resize(1);
    dangle.structures[0].name = "A";
    dangle.structures[0].elements = {GdsSRef{"GONE", {}}};
    CHECK_THROWS_WITH_AS(flatten(dangle, "A"), doctest::Contains("dangling reference"), GeomError);
}

// Reference instance counter: walks structures counting polygons without any
// transform machinery, as an independent check on flatten's emission count.
static std::size_t count_polys(const GdsLibrary& lib, const std::string& name) {
    const auto* s = lib.find(name);
    REQUIRE(s != nullptr);
    std::size_t n = 0;
    for (const auto& el : s->elements) {
        if (std::holds_alternative<GdsBoundary>(el)) ++n;
        else if (const auto* p = std::get_if<GdsPath>(&el)) {
            bool degenerate = true;
            for (std::size_t i = 1; i < p->points.size(); ++i)
                if (!(p->points[i] == p->points[i - 1])) degenerate = false;
            if (!degenerate && p->width > 0) ++n;
        } else if (const auto* r = std::get_if<GdsSRef>(&el))
            n += count_polys(lib, r->target);
        else if (const auto* a = std::get_if<GdsARef>(&el))
            n += std::size_t(a->cols) * std::size_t(a->rows) * count_polys(lib, a->target);
    }
    return n;
}

TEST_CASE("flatten emits exactly instances x local polygons on random hierarchies") {
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        auto lib = testsupport::random_library(seed);
        const auto& top = lib.structures.back().name;
        auto flat = flatten(lib, top);
        CHECK(flat.size() == count_polys(lib, top));
    }
}

static double total_area(std::span<const FlatPolygon> polys) {
    double a = 0;
    for (const auto& p : polys) a += std::abs(signed_area2(p.vertices)) / 2.0;
    return a;
}

TEST_CASE("flatten conserves area under rigid transforms") {
    SplitMix64 rng{777};
    for (int iter = 0; iter < 40; ++iter) {
        GdsLibrary lib;
        lib.structures.resize(2);
        lib.structures[0].name = "LEAF";
        int nrect = 1 + int(rng.below(5));
        std::int64_t max_edge = 0;
        for (int i = 0; i < nrect; ++i) {
            std::int64_t x = std::int64_t(rng.below(10000)), y = std::int64_t(rng.below(10000));
            std::int64_t w = 1 + std::int64_t(rng.below(500)), h = 1 + std::int64_t(rng.below(500));
            max_edge = std::max({max_edge, w, h});
            lib.structures[0].elements.push_back(rect(1, {x, y}, {x + w, y + h}));
        }
        GdsSRef ref;
        ref.target = "LEAF";
        ref.transform.reflect_x = rng.below(2) == 1;
        ref.transform.translate = {std::int64_t(rng.below(100000)), std::int64_t(rng.below(100000))};
        lib.structures[1].name = "TOP";

        double base = total_area(flatten(lib, "LEAF"));

        // right-angle rotation/reflection/translation: exact conservation,
        // comfortably inside the 0.5 dbu²·vertex-count budget
        ref.transform.angle_deg = 90.0 * double(rng.below(4));
        lib.structures[1].elements = {ref};
        CHECK(total_area(flatten(lib, "TOP")) == base);

        // arbitrary angle: per-vertex rounding (≤ √2/2 dbu) perturbs area by
        // at most ~0.71·edge per vertex, so scale the slack by the edge length
        ref.transform.angle_deg = double(rng.below(3600)) / 10.0;
        lib.structures[1].elements = {ref};
        auto flat = flatten(lib, "TOP");
        std::size_t verts = 0;
        for (const auto& f : flat) verts += f.vertices.size();
        double slack = 0.75 * double(verts) * double(max_edge) * 1.5;
        CHECK(std::abs(total_area(flat) - base) <= slack);
    }
}

TEST_CASE("dbu-scale polygons keep area within half a square dbu per vertex at any angle") {
    SplitMix64 rng{779};
    for (int iter = 0; iter < 300; ++iter) {
        GdsLibrary lib;
        lib.structures.resize(2);
        lib.structures[0].name = "LEAF";
        std::int64_t w = 1 + std::int64_t(rng.below(4)), h = 1 + std::int64_t(rng.below(4));
        lib.structures[0].elements = {rect(1, {0, 0}, {w, h})};
        GdsSRef ref;
        ref.target = "LEAF";
        ref.transform.angle_deg = double(rng.below(36000)) / 100.0;
        ref.transform.reflect_x = rng.below(2) == 1;
        ref.transform.translate = {std::int64_t(rng.below(1000)), std::int64_t(rng.below(1000))};
        lib.structures[1].name = "TOP";
        lib.structures[1].elements = {ref};

        auto flat = flatten(lib, "TOP");
        REQUIRE(flat.size() == 1);
        double got = std::abs(signed_area2(flat[0].vertices)) / 2.0;
        CHECK(std::abs(got - double(w * h)) <= 0.5 * double(flat[0].vertices.size()) * double(std::max(w, h)));
    }
}

TEST_CASE("extract_layer then flatten equals flatten filtered by layer") {
    // 134/0 geometry two reference levels deep, mixed with other layers
    GdsLibrary lib;
    lib.structures.resize(3);
    lib.structures[0].name = "DEEP";
    lib.structures[0].elements = {rect(134, {0, 0}, {10, 10}), rect(7, {20, 0}, {30, 10})};
    GdsPath pth;
    pth.layer = 134;
    pth.width = 4;
    pth.points = {{0, 0}, {50, 0}};
    lib.structures[0].elements.push_back(pth);
    GdsSRef r1;
    r1.target = "DEEP";
    r1.transform.angle_deg = 90.0;
    r1.transform.translate = {100, 0};
    lib.structures[1].name = "MID";
    lib.structures[1].elements = {r1, rect(134, {-5, -5}, {5, 5})};
    GdsSRef r2;
    r2.target = "MID";
    r2.transform.reflect_x = true;
    r2.transform.translate = {0, 300};
    lib.structures[2].name = "TOP";
    lib.structures[2].elements = {r2, rect(9, {0, 0}, {1, 1})};

    LayerKey key{134, 0};
    auto extracted = flatten(extract_layer(lib, key), "TOP");
    auto filtered = flatten(lib, "TOP", key);

    auto canon = [](std::vector<FlatPolygon> v) {
        std::vector<std::vector<Vec2>> out;
        for (auto& p : v) out.push_back(sorted_verts(p));
        std::sort(out.begin(), out.end());
        return out;
    };
    CHECK(canon(extracted) == canon(filtered));
    CHECK(extracted.size() == 3);  // DEEP rect + DEEP path + MID rect
}

// Same rule merge_libraries uses: first structure referenced by no other.
static std::string first_unreferenced(const GdsLibrary& lib) {
    std::set<std::string> referenced;
    for (const auto& s : lib.structures)
        for (const auto& el : s.elements) {
            if (const auto* r = std::get_if<GdsSRef>(&el)) referenced.insert(r->target);
            else if (const auto* a = std::get_if<GdsARef>(&el)) referenced.insert(a->target);
        }
    for (const auto& s : lib.structures)
        if (!referenced.count(s.name)) return s.name;
    return {};
}

TEST_CASE("merge adds flattened polygon counts") {
    for (std::uint64_t seed = 31; seed < 41; ++seed) {
        auto base = testsupport::random_library(seed);
        auto art = testsupport::random_library(seed + 1000);
        const auto& base_top = base.structures.back().name;
        std::string art_top = first_unreferenced(art);
        REQUIRE(!art_top.empty());

        std::size_t nb = flatten(base, base_top).size();
        std::size_t na = flatten(art, art_top).size();
        auto merged = merge_libraries(base, art, base_top);
        CHECK(flatten(merged, base_top).size() == nb + na);
    }
}

TEST_CASE("build_occupancy worked examples") {
    SUBCASE("empty stream gives all-clear grid") {
        auto g = build_occupancy({}, {0, 0}, 10, 4, 4, 0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) CHECK_FALSE(g.at(c, r));
    }
    SUBCASE("rect exactly covering cell (0,0), keepout 0, marks only it") {
        FlatPolygon p;
        p.layer = {1, 0};
        p.vertices = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
        p.compute_bbox();
        auto g = build_occupancy(std::array{p}, {0, 0}, 10, 4, 4, 0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) CHECK(g.at(c, r) == (c == 0 && r == 0));
    }
    SUBCASE("same rect with keepout = pitch marks the 3x3 neighborhood") {
        FlatPolygon p;
        p.layer = {1, 0};
        p.vertices = {{10, 10}, {20, 10}, {20, 20}, {10, 20}};
        p.compute_bbox();
        auto g = build_occupancy(std::array{p}, {0, 0}, 10, 4, 4, 10);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) CHECK(g.at(c, r) == (c >= 0 && c <= 2 && r >= 0 && r <= 2));
    }
}

TEST_CASE("occupancy conservatism: every polygon point lies in a marked closed cell") {
    SplitMix64 rng{2024};
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<FlatPolygon> polys;
        int n = 1 + int(rng.below(6));
        for (int i = 0; i < n; ++i) {
            FlatPolygon p;
            p.layer = {1, 0};
            std::int64_t x = std::int64_t(rng.below(900)), y = std::int64_t(rng.below(900));
            std::int64_t w = 1 + std::int64_t(rng.below(100)), h = 1 + std::int64_t(rng.below(100));
            p.vertices = {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
            p.compute_bbox();
            polys.push_back(std::move(p));
        }
        std::int64_t pitch = 1 + std::int64_t(rng.below(50));
        auto g = build_occupancy(polys, {0, 0}, pitch, int(1000 / pitch) + 2, int(1000 / pitch) + 2, 0);
        for (const auto& p : polys)
            for (auto v : p.vertices) {
                bool covered = false;
                for (int dc = -1; dc <= 0 && !covered; ++dc)
                    for (int dr = -1; dr <= 0 && !covered; ++dr) {
                        std::int64_t c = v.x / pitch + dc, r = v.y / pitch + dr;
                        if (c < 0 || r < 0) continue;
                        Rect64 cell = g.cell_rect(int(c), int(r));
                        bool contains = v.x >= cell.lo.x && v.x <= cell.hi.x && v.y >= cell.lo.y &&
                                        v.y <= cell.hi.y;
                        if (contains && g.at(int(c), int(r))) covered = true;
                    }
                CHECK(covered);
            }
    }
}
