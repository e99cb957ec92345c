#pragma once

#include <cstdint>
#include <vector>

#include "gae/datagen.hpp"

namespace gae {

constexpr std::int64_t kCellSize = 16;       // scene pixels per bottleneck-grid cell
constexpr std::int64_t kFootprintSize = 32;  // glimpse footprint side
constexpr std::int64_t kFoveaSize = 16;      // full-resolution center
constexpr std::int64_t kFoveaOffset = 8;     // fovea origin within the footprint
constexpr std::int64_t kPeripherySamples = 192;
constexpr std::int64_t kSampledPixelsPerGlimpse = 448;  // 256 fovea + 192 periphery

struct GlimpseAnchor {
    std::int64_t cell_row = 0;
    std::int64_t cell_col = 0;
    bool operator==(const GlimpseAnchor&) const = default;
};

// Clamped footprint origin in scene pixels (footprint stays inside the image).
std::int64_t clamp_footprint_origin(std::int64_t cell_index, std::int64_t image_extent);

struct RetinaGlimpse {
    GlimpseAnchor anchor;
    std::int64_t top = 0, left = 0;   // clamped footprint origin
    std::vector<double> fovea;        // [3,16,16]
    std::vector<double> periphery;    // [3,192], row-major over the stride-2 ring
    std::vector<double> reprojected;  // [3,32,32]; fovea exact, ring nearest-neighbor
};

struct VisitedMask {
    std::int64_t rows = 0, cols = 0;
    std::vector<std::uint8_t> cells;

    static VisitedMask make(std::int64_t rows, std::int64_t cols);
    bool at(std::int64_t r, std::int64_t c) const { return cells[static_cast<std::size_t>(r * cols + c)] != 0; }
    void set(std::int64_t r, std::int64_t c) { cells[static_cast<std::size_t>(r * cols + c)] = 1; }
    std::int64_t popcount() const;
    bool all_visited() const { return popcount() == rows * cols; }
};

// Tracks unique scene pixels read through the retina (the partial-observability
// audit for evaluation episodes).
struct PixelAudit {
    std::int64_t height = 0, width = 0;
    std::vector<std::uint8_t> touched;
    std::int64_t unique_pixels = 0;

    static PixelAudit make(std::int64_t height, std::int64_t width);
    void mark(std::int64_t r, std::int64_t c);
};

// Visits the 448 sampled scene positions of the clamped footprint at (top,left):
// the 16x16 fovea first (row-major), then the stride-2 periphery ring (row-major).
template <typename F>
void for_each_sampled_pixel(std::int64_t top, std::int64_t left, F&& fn) {
    for (std::int64_t r = 0; r < kFoveaSize; ++r) {
        for (std::int64_t c = 0; c < kFoveaSize; ++c) {
            fn(top + kFoveaOffset + r, left + kFoveaOffset + c);
        }
    }
    for (std::int64_t fr = 0; fr < kFootprintSize; fr += 2) {
        for (std::int64_t fc = 0; fc < kFootprintSize; fc += 2) {
            const bool in_fovea = fr >= kFoveaOffset && fr < kFoveaOffset + kFoveaSize && fc >= kFoveaOffset &&
                                  fc < kFoveaOffset + kFoveaSize;
            if (!in_fovea) {
                fn(top + fr, left + fc);
            }
        }
    }
}

RetinaGlimpse extract_glimpse(const Scene& scene, const GlimpseAnchor& anchor, PixelAudit* audit = nullptr);

// Unique sampled-pixel fraction for the given glimpse anchors (overlaps dedup).
double pixel_budget(const std::vector<GlimpseAnchor>& anchors, std::int64_t height, std::int64_t width);

// Marks the 2x2 block of bottleneck cells covered by the clamped footprint.
void mark_visited(VisitedMask& mask, const GlimpseAnchor& anchor, std::int64_t height, std::int64_t width);

} // namespace gae
