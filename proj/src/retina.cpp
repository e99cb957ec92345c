#include "gae/retina.hpp"

#include <algorithm>

#include "gae/error.hpp"

namespace gae {

namespace {

// Ordinal of each stride-2 footprint position within the periphery ring, or -1
// inside the fovea box. Indexed by [fr/2][fc/2].
struct PeripheryIndex {
    int table[16][16];
    PeripheryIndex() {
        int next = 0;
        for (int fr = 0; fr < 32; fr += 2) {
            for (int fc = 0; fc < 32; fc += 2) {
                const bool in_fovea = fr >= 8 && fr < 24 && fc >= 8 && fc < 24;
                table[fr / 2][fc / 2] = in_fovea ? -1 : next++;
            }
        }
    }
};

const PeripheryIndex& periphery_index() {
    static const PeripheryIndex idx;
    return idx;
}

} // namespace

std::int64_t clamp_footprint_origin(std::int64_t cell_index, std::int64_t image_extent) {
    return std::min(cell_index * kCellSize, image_extent - kFootprintSize);
}

VisitedMask VisitedMask::make(std::int64_t rows, std::int64_t cols) {
    VisitedMask m;
    m.rows = rows;
    m.cols = cols;
    m.cells.assign(static_cast<std::size_t>(rows * cols), 0);
    return m;
}

std::int64_t VisitedMask::popcount() const {
    std::int64_t n = 0;
    for (const auto c : cells) {
        n += c;
    }
    return n;
}

PixelAudit PixelAudit::make(std::int64_t height, std::int64_t width) {
    PixelAudit a;
    a.height = height;
    a.width = width;
    a.touched.assign(static_cast<std::size_t>(height * width), 0);
    return a;
}

void PixelAudit::mark(std::int64_t r, std::int64_t c) {
    auto& cell = touched[static_cast<std::size_t>(r * width + c)];
    if (!cell) {
        cell = 1;
        ++unique_pixels;
    }
}

RetinaGlimpse extract_glimpse(const Scene& scene, const GlimpseAnchor& anchor, PixelAudit* audit) {
    if (scene.height < kFootprintSize || scene.width < kFootprintSize) {
        throw ConfigError("extract_glimpse: scene smaller than the 32x32 footprint");
    }
    RetinaGlimpse g;
    g.anchor = anchor;
    g.top = clamp_footprint_origin(anchor.cell_row, scene.height);
    g.left = clamp_footprint_origin(anchor.cell_col, scene.width);

    const std::int64_t px = scene.height * scene.width;
    g.fovea.resize(static_cast<std::size_t>(3 * kFoveaSize * kFoveaSize));
    g.periphery.resize(static_cast<std::size_t>(3 * kPeripherySamples));

    auto read = [&](std::int64_t r, std::int64_t c, int ch) {
        return scene.image[static_cast<std::size_t>(ch * px + r * scene.width + c)];
    };

    // Fovea: exact center pixels.
    for (std::int64_t r = 0; r < kFoveaSize; ++r) {
        for (std::int64_t c = 0; c < kFoveaSize; ++c) {
            const std::int64_t sr = g.top + kFoveaOffset + r;
            const std::int64_t sc = g.left + kFoveaOffset + c;
            if (audit) {
                audit->mark(sr, sc);
            }
            for (int ch = 0; ch < 3; ++ch) {
                g.fovea[static_cast<std::size_t>(ch * kFoveaSize * kFoveaSize + r * kFoveaSize + c)] =
                    read(sr, sc, ch);
            }
        }
    }

    // Periphery: stride-2 samples over the remaining ring.
    const auto& pidx = periphery_index();
    for (std::int64_t fr = 0; fr < kFootprintSize; fr += 2) {
        for (std::int64_t fc = 0; fc < kFootprintSize; fc += 2) {
            const int ord = pidx.table[fr / 2][fc / 2];
            if (ord < 0) {
                continue;
            }
            const std::int64_t sr = g.top + fr;
            const std::int64_t sc = g.left + fc;
            if (audit) {
                audit->mark(sr, sc);
            }
            for (int ch = 0; ch < 3; ++ch) {
                g.periphery[static_cast<std::size_t>(ch * kPeripherySamples + ord)] = read(sr, sc, ch);
            }
        }
    }

    // Reprojection from the samples alone: fovea exact, ring snapped to its
    // covering stride-2 sample (nearest-neighbor upsampling).
    g.reprojected.resize(static_cast<std::size_t>(3 * kFootprintSize * kFootprintSize));
    for (std::int64_t fr = 0; fr < kFootprintSize; ++fr) {
        for (std::int64_t fc = 0; fc < kFootprintSize; ++fc) {
            const bool in_fovea = fr >= kFoveaOffset && fr < kFoveaOffset + kFoveaSize && fc >= kFoveaOffset &&
                                  fc < kFoveaOffset + kFoveaSize;
            for (int ch = 0; ch < 3; ++ch) {
                double v;
                if (in_fovea) {
                    const std::int64_t r = fr - kFoveaOffset;
                    const std::int64_t c = fc - kFoveaOffset;
                    v = g.fovea[static_cast<std::size_t>(ch * kFoveaSize * kFoveaSize + r * kFoveaSize + c)];
                } else {
                    const int ord = pidx.table[(fr / 2)][(fc / 2)];
                    v = g.periphery[static_cast<std::size_t>(ch * kPeripherySamples + ord)];
                }
                g.reprojected[static_cast<std::size_t>((ch * kFootprintSize + fr) * kFootprintSize + fc)] = v;
            }
        }
    }
    return g;
}

double pixel_budget(const std::vector<GlimpseAnchor>& anchors, std::int64_t height, std::int64_t width) {
    if (anchors.empty()) {
        return 0.0;
    }
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(height * width), 0);
    std::int64_t unique = 0;
    for (const auto& a : anchors) {
        const std::int64_t top = clamp_footprint_origin(a.cell_row, height);
        const std::int64_t left = clamp_footprint_origin(a.cell_col, width);
        for_each_sampled_pixel(top, left, [&](std::int64_t r, std::int64_t c) {
            auto& cell = seen[static_cast<std::size_t>(r * width + c)];
            if (!cell) {
                cell = 1;
                ++unique;
            }
        });
    }
    return static_cast<double>(unique) / static_cast<double>(height * width);
}

void mark_visited(VisitedMask& mask, const GlimpseAnchor& anchor, std::int64_t height, std::int64_t width) {
    const std::int64_t top_cell = clamp_footprint_origin(anchor.cell_row, height) / kCellSize;
    const std::int64_t left_cell = clamp_footprint_origin(anchor.cell_col, width) / kCellSize;
    for (std::int64_t dr = 0; dr < 2; ++dr) {
        for (std::int64_t dc = 0; dc < 2; ++dc) {
            mask.set(top_cell + dr, left_cell + dc);
        }
    }
}

} // namespace gae
