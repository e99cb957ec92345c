#pragma once

#include <cstdint>

#include "gae/nn.hpp"
#include "gae/retina.hpp"
#include "gae/tensor.hpp"

namespace gae {

// Channel widths per encoder level: L1/L2 share c1; desk-scale default
// (16,16,32,64), paper scale (64,64,128,256).
struct EncoderConfig {
    std::int64_t c1 = 16;
    std::int64_t c2 = 32;
    std::int64_t c3 = 64;
};

// Outputs of the four encoder stages (or the corresponding decoder levels).
// Intermediate levels may be null in the bottleneck-only variant.
struct LevelFeatures {
    TensorPtr level1;      // [B,c1,h/2,w/2]
    TensorPtr level2;      // [B,c1,h/4,w/4]
    TensorPtr level3;      // [B,c2,h/8,w/8]
    TensorPtr bottleneck;  // [B,c3,h/16,w/16]
};

// Four stages, each a stride-2 conv followed by a stride-1 conv, ReLU after
// both. One parameter set shared between the glimpse and full-image branches.
struct EncoderWeights {
    Conv2dLayer s1_down, s1_keep;
    Conv2dLayer s2_down, s2_keep;
    Conv2dLayer s3_down, s3_keep;
    Conv2dLayer s4_down, s4_keep;

    static EncoderWeights make(const EncoderConfig& cfg, Rng& rng);
    void register_params(ParameterList& out, const std::string& prefix) const;
};

LevelFeatures encode(const TensorPtr& patch, const EncoderWeights& weights);

// Teacher branch: same forward, but run without graph recording so no
// gradient can reach the encoder through it.
LevelFeatures encode_full_image_detached(const Scene& scene, const EncoderWeights& weights);

TensorPtr scene_to_tensor(const Scene& scene);

struct MemoryBank {
    std::int64_t scene_h = 0, scene_w = 0;
    EncoderConfig cfg;
    bool bottleneck_only = false;
    TensorPtr level1, level2, level3, bottleneck;
    std::vector<std::uint8_t> occ1, occ2, occ3, occ_b;  // per-level occupancy grids
    VisitedMask visited;

    static MemoryBank make(std::int64_t scene_h, std::int64_t scene_w, const EncoderConfig& cfg,
                           bool bottleneck_only = false);

    // Overwrite-on-overlap write of 32x32-patch features at the clamped
    // footprint origin (top,left) in scene pixels.
    void write(const LevelFeatures& feats, std::int64_t top, std::int64_t left);

    double bottleneck_occupancy_fraction() const;
    bool occupied_at(int level, std::int64_t r, std::int64_t c) const;
    std::int64_t grid_rows() const { return scene_h / kCellSize; }
    std::int64_t grid_cols() const { return scene_w / kCellSize; }
};

// Per-level boundary oracle: true iff the receptive field of position (r,c)
// in a level-`level` block of a 32x32 patch lies entirely inside the patch,
// i.e. the glimpse-encoded value must equal the full-image-encoded one.
bool rf_inside_patch(int level, std::int64_t r, std::int64_t c);

struct CoverageReport {
    bool match = true;
    double max_abs_diff = 0.0;
    std::int64_t interior_positions = 0;
};

// Compares bank contents against encode(full image) on RF-interior positions
// of every occupied block.
CoverageReport compare_bank_to_full_image(const MemoryBank& bank, const Scene& scene, const EncoderWeights& weights,
                                          double tol);

// Writes all non-overlapping glimpses of the scene, then compares.
bool coverage_equivalence_check(const Scene& scene, const EncoderWeights& weights, double tol = 1e-9);

} // namespace gae
