#include <set>

#include <doctest.h>

#include "gae/datagen.hpp"
#include "gae/error.hpp"
#include "gae/retina.hpp"
#include "gae/rng.hpp"

using namespace gae;

namespace {

Scene constant_scene(std::int64_t size, double value) {
    Scene s;
    s.height = size;
    s.width = size;
    s.image.assign(static_cast<std::size_t>(3 * size * size), value);
    s.seg_labels.assign(static_cast<std::size_t>(size * size), 0);
    return s;
}

Scene checkerboard_scene(std::int64_t size) {
    Scene s = constant_scene(size, 0.0);
    const std::int64_t px = size * size;
    for (std::int64_t r = 0; r < size; ++r) {
        for (std::int64_t c = 0; c < size; ++c) {
            const double v = ((r + c) % 2 == 0) ? 1.0 : 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                s.image[static_cast<std::size_t>(ch * px + r * size + c)] = v;
            }
        }
    }
    return s;
}

} // namespace

TEST_CASE("extract_glimpse: constant scene reprojects exactly") {
    const Scene s = constant_scene(128, 0.37);
    const auto g = extract_glimpse(s, {3, 4});
    for (const double v : g.reprojected) {
        CHECK(v == 0.37);
    }
    CHECK(g.fovea.size() == 3 * 256);
    CHECK(g.periphery.size() == 3 * 192);
}

TEST_CASE("extract_glimpse: corner anchor needs no clamping") {
    const Scene s = constant_scene(128, 0.5);
    const auto g = extract_glimpse(s, {0, 0});
    CHECK(g.top == 0);
    CHECK(g.left == 0);
}

TEST_CASE("extract_glimpse: edge anchors clamp so the footprint stays inside") {
    const Scene s = constant_scene(128, 0.5);
    const auto g = extract_glimpse(s, {7, 7});
    CHECK(g.top == 96);
    CHECK(g.left == 96);
}

TEST_CASE("extract_glimpse: fovea is exact, sampled count is 448") {
    Scene s = constant_scene(128, 0.0);
    const std::int64_t px = 128 * 128;
    for (std::int64_t i = 0; i < 3 * px; ++i) {
        s.image[static_cast<std::size_t>(i)] = static_cast<double>(i % 977) / 977.0;
    }
    PixelAudit audit = PixelAudit::make(128, 128);
    const auto g = extract_glimpse(s, {2, 5}, &audit);
    CHECK(audit.unique_pixels == kSampledPixelsPerGlimpse);

    // central 16x16 of the reprojected patch equals the scene exactly
    for (std::int64_t r = 0; r < 16; ++r) {
        for (std::int64_t c = 0; c < 16; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                const double patch =
                    g.reprojected[static_cast<std::size_t>((ch * 32 + 8 + r) * 32 + 8 + c)];
                const double scene_px =
                    s.image[static_cast<std::size_t>(ch * px + (g.top + 8 + r) * 128 + g.left + 8 + c)];
                CHECK(patch == scene_px);
            }
        }
    }
}

TEST_CASE("extract_glimpse: periphery values come from the stride-2 grid") {
    const Scene s = checkerboard_scene(128);
    const std::int64_t px = 128 * 128;
    const auto g = extract_glimpse(s, {1, 2});
    for (std::int64_t fr = 0; fr < 32; ++fr) {
        for (std::int64_t fc = 0; fc < 32; ++fc) {
            const bool in_fovea = fr >= 8 && fr < 24 && fc >= 8 && fc < 24;
            if (in_fovea) {
                continue;
            }
            // nearest-neighbor: the value equals the snapped stride-2 sample
            const double got = g.reprojected[static_cast<std::size_t>((0 * 32 + fr) * 32 + fc)];
            const std::int64_t sr = g.top + (fr / 2) * 2;
            const std::int64_t sc = g.left + (fc / 2) * 2;
            CHECK(got == s.image[static_cast<std::size_t>(0 * px + sr * 128 + sc)]);
        }
    }
}

TEST_CASE("extract_glimpse: scene smaller than the footprint is rejected") {
    const Scene s = constant_scene(16, 0.5);
    CHECK_THROWS_AS(extract_glimpse(s, {0, 0}), ConfigError);
}

TEST_CASE("pixel_budget: non-overlapping, empty, duplicate anchors") {
    std::vector<GlimpseAnchor> anchors;
    CHECK(pixel_budget(anchors, 128, 128) == 0.0);

    // 8 non-overlapping footprints: 8*448/16384
    for (std::int64_t i = 0; i < 8; ++i) {
        anchors.push_back({(i / 4) * 2, (i % 4) * 2});
    }
    CHECK(pixel_budget(anchors, 128, 128) == doctest::Approx(8.0 * 448.0 / 16384.0));

    // duplicates do not add coverage
    std::vector<GlimpseAnchor> dup{{1, 1}, {1, 1}};
    CHECK(pixel_budget(dup, 128, 128) == doctest::Approx(448.0 / 16384.0));
}

TEST_CASE("pixel_budget: monotone non-decreasing in T") {
    Rng rng(7);
    std::vector<GlimpseAnchor> anchors;
    double prev = 0.0;
    for (int t = 0; t < 12; ++t) {
        anchors.push_back({static_cast<std::int64_t>(rng.uniform_int(8)),
                           static_cast<std::int64_t>(rng.uniform_int(8))});
        const double f = pixel_budget(anchors, 128, 128);
        CHECK(f >= prev);
        prev = f;
    }
}

TEST_CASE("mark_visited: interior, idempotent, corner-clamped") {
    auto mask = VisitedMask::make(8, 8);
    mark_visited(mask, {2, 3}, 128, 128);
    CHECK(mask.popcount() == 4);
    CHECK(mask.at(2, 3));
    CHECK(mask.at(3, 4));

    mark_visited(mask, {2, 3}, 128, 128);
    CHECK(mask.popcount() == 4);  // idempotent

    auto corner = VisitedMask::make(8, 8);
    mark_visited(corner, {7, 7}, 128, 128);
    CHECK(corner.popcount() == 4);
    // clamped footprint covers cells {6,7} x {6,7}
    CHECK(corner.at(6, 6));
    CHECK(corner.at(7, 7));
    CHECK_FALSE(corner.at(5, 5));
}
