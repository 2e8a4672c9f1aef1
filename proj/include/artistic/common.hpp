#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace artistic {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or contradictory user configuration; maps to a distinct exit code in the CLI.
struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct Vec2 {
    std::int64_t x = 0;
    std::int64_t y = 0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(std::int64_t k, Vec2 v) { return {k * v.x, k * v.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
    friend constexpr auto operator<=>(Vec2, Vec2) = default;
};

struct DVec2 {
    double x = 0.0;
    double y = 0.0;
};

// Axis-aligned dbu rectangle, closed on both ends.
struct Rect64 {
    Vec2 lo{INT64_MAX, INT64_MAX};
    Vec2 hi{INT64_MIN, INT64_MIN};

    constexpr bool valid() const { return lo.x <= hi.x && lo.y <= hi.y; }
    constexpr std::int64_t width() const { return hi.x - lo.x; }
    constexpr std::int64_t height() const { return hi.y - lo.y; }

    void grow(Vec2 p) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    void grow(const Rect64& r) {
        if (!r.valid()) return;
        grow(r.lo);
        grow(r.hi);
    }
    constexpr Rect64 expanded(std::int64_t m) const {
        return {{lo.x - m, lo.y - m}, {hi.x + m, hi.y + m}};
    }
    // Positive-area overlap; touching edges do not count.
    constexpr bool overlaps_open(const Rect64& r) const {
        return lo.x < r.hi.x && r.lo.x < hi.x && lo.y < r.hi.y && r.lo.y < hi.y;
    }
    constexpr bool contains(Vec2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }
    constexpr bool contains(const Rect64& r) const {
        return r.lo.x >= lo.x && r.lo.y >= lo.y && r.hi.x <= hi.x && r.hi.y <= hi.y;
    }
    friend constexpr bool operator==(const Rect64&, const Rect64&) = default;
};

// Rounds to nearest, ties away from zero (the coordinate rounding rule used throughout).
inline std::int64_t round_away(double v) { return std::llround(v); }

// Deterministic 64-bit generator; used wherever a seeded order is part of the output contract.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // Uniform in [0, n) by rejection; independent of libstdc++ distributions.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }
};

// Runs fn(0..count-1) on up to `jobs` threads. Order of execution is unspecified;
// callers must not depend on it for output bytes.
inline void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::size_t nthreads = std::min<std::size_t>(std::max(jobs, 1), count);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    std::mutex err_mx;
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load(std::memory_order_relaxed)) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lk(err_mx);
                    if (!err) err = std::current_exception();
                    failed = true;
                    break;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace artistic
