#include "gae/encoder.hpp"

#include <algorithm>

#include "gae/error.hpp"

namespace gae {

EncoderWeights EncoderWeights::make(const EncoderConfig& cfg, Rng& rng) {
    EncoderWeights w;
    w.s1_down = Conv2dLayer::make(3, cfg.c1, 3, 2, 1, rng);
    w.s1_keep = Conv2dLayer::make(cfg.c1, cfg.c1, 3, 1, 1, rng);
    w.s2_down = Conv2dLayer::make(cfg.c1, cfg.c1, 3, 2, 1, rng);
    w.s2_keep = Conv2dLayer::make(cfg.c1, cfg.c1, 3, 1, 1, rng);
    w.s3_down = Conv2dLayer::make(cfg.c1, cfg.c2, 3, 2, 1, rng);
    w.s3_keep = Conv2dLayer::make(cfg.c2, cfg.c2, 3, 1, 1, rng);
    w.s4_down = Conv2dLayer::make(cfg.c2, cfg.c3, 3, 2, 1, rng);
    w.s4_keep = Conv2dLayer::make(cfg.c3, cfg.c3, 3, 1, 1, rng);
    return w;
}

void EncoderWeights::register_params(ParameterList& out, const std::string& prefix) const {
    s1_down.register_params(out, prefix + ".stage1.down");
    s1_keep.register_params(out, prefix + ".stage1.keep");
    s2_down.register_params(out, prefix + ".stage2.down");
    s2_keep.register_params(out, prefix + ".stage2.keep");
    s3_down.register_params(out, prefix + ".stage3.down");
    s3_keep.register_params(out, prefix + ".stage3.keep");
    s4_down.register_params(out, prefix + ".stage4.down");
    s4_keep.register_params(out, prefix + ".stage4.keep");
}

LevelFeatures encode(const TensorPtr& patch, const EncoderWeights& weights) {
    if (patch->shape.size() != 4 || patch->shape[1] != 3) {
        throw ConfigError("encode expects input [B,3,h,w]");
    }
    if (patch->shape[2] % 16 != 0 || patch->shape[3] % 16 != 0) {
        throw ConfigError("encode requires h and w divisible by 16");
    }
    LevelFeatures f;
    f.level1 = relu(weights.s1_keep.forward(relu(weights.s1_down.forward(patch))));
    f.level2 = relu(weights.s2_keep.forward(relu(weights.s2_down.forward(f.level1))));
    f.level3 = relu(weights.s3_keep.forward(relu(weights.s3_down.forward(f.level2))));
    f.bottleneck = relu(weights.s4_keep.forward(relu(weights.s4_down.forward(f.level3))));
    return f;
}

TensorPtr scene_to_tensor(const Scene& scene) {
    return Tensor::from_data({1, 3, scene.height, scene.width}, scene.image, false);
}

LevelFeatures encode_full_image_detached(const Scene& scene, const EncoderWeights& weights) {
    NoGradGuard no_grad;
    return encode(scene_to_tensor(scene), weights);
}

MemoryBank MemoryBank::make(std::int64_t scene_h, std::int64_t scene_w, const EncoderConfig& cfg,
                            bool bottleneck_only) {
    if (scene_h % kCellSize != 0 || scene_w % kCellSize != 0) {
        throw ConfigError("MemoryBank requires scene sides divisible by 16");
    }
    MemoryBank b;
    b.scene_h = scene_h;
    b.scene_w = scene_w;
    b.cfg = cfg;
    b.bottleneck_only = bottleneck_only;
    b.bottleneck = Tensor::zeros({1, cfg.c3, scene_h / 16, scene_w / 16});
    b.occ_b.assign(static_cast<std::size_t>((scene_h / 16) * (scene_w / 16)), 0);
    if (!bottleneck_only) {
        b.level1 = Tensor::zeros({1, cfg.c1, scene_h / 2, scene_w / 2});
        b.level2 = Tensor::zeros({1, cfg.c1, scene_h / 4, scene_w / 4});
        b.level3 = Tensor::zeros({1, cfg.c2, scene_h / 8, scene_w / 8});
        b.occ1.assign(static_cast<std::size_t>((scene_h / 2) * (scene_w / 2)), 0);
        b.occ2.assign(static_cast<std::size_t>((scene_h / 4) * (scene_w / 4)), 0);
        b.occ3.assign(static_cast<std::size_t>((scene_h / 8) * (scene_w / 8)), 0);
    }
    b.visited = VisitedMask::make(scene_h / kCellSize, scene_w / kCellSize);
    return b;
}

namespace {

void set_occupancy(std::vector<std::uint8_t>& occ, std::int64_t grid_w, std::int64_t r0, std::int64_t c0,
                   std::int64_t rows, std::int64_t cols) {
    for (std::int64_t r = r0; r < r0 + rows; ++r) {
        std::fill(occ.begin() + r * grid_w + c0, occ.begin() + r * grid_w + c0 + cols, std::uint8_t{1});
    }
}

} // namespace

void MemoryBank::write(const LevelFeatures& feats, std::int64_t top, std::int64_t left) {
    if (feats.bottleneck->shape[2] != kFootprintSize / 16 || feats.bottleneck->shape[3] != kFootprintSize / 16) {
        throw ConfigError("MemoryBank::write expects features of a 32x32 patch");
    }
    if (top % kCellSize != 0 || left % kCellSize != 0) {
        throw std::logic_error("MemoryBank::write offsets must be 16-pixel aligned");
    }
    bottleneck = write_block(bottleneck, feats.bottleneck, top / 16, left / 16);
    set_occupancy(occ_b, scene_w / 16, top / 16, left / 16, 2, 2);
    if (!bottleneck_only) {
        level1 = write_block(level1, feats.level1, top / 2, left / 2);
        level2 = write_block(level2, feats.level2, top / 4, left / 4);
        level3 = write_block(level3, feats.level3, top / 8, left / 8);
        set_occupancy(occ1, scene_w / 2, top / 2, left / 2, 16, 16);
        set_occupancy(occ2, scene_w / 4, top / 4, left / 4, 8, 8);
        set_occupancy(occ3, scene_w / 8, top / 8, left / 8, 4, 4);
    }
}

double MemoryBank::bottleneck_occupancy_fraction() const {
    std::int64_t n = 0;
    for (const auto v : occ_b) {
        n += v;
    }
    return static_cast<double>(n) / static_cast<double>(occ_b.size());
}

bool MemoryBank::occupied_at(int level, std::int64_t r, std::int64_t c) const {
    const std::vector<std::uint8_t>* occ = nullptr;
    std::int64_t w = 0;
    switch (level) {
        case 1: occ = &occ1; w = scene_w / 2; break;
        case 2: occ = &occ2; w = scene_w / 4; break;
        case 3: occ = &occ3; w = scene_w / 8; break;
        case 4: occ = &occ_b; w = scene_w / 16; break;
        default: throw ConfigError("occupied_at: level must be 1..4");
    }
    return (*occ)[static_cast<std::size_t>(r * w + c)] != 0;
}

bool rf_inside_patch(int level, std::int64_t r, std::int64_t c) {
    // Each stage maps out position p to input interval [2p-3, 2p+3];
    // composing stages gives [2^L p - radius_L, 2^L p + radius_L] with
    // radius_{L} = 2*radius_{L-1} + 3, radius_1 = 3.
    std::int64_t scale = 2, radius = 3;
    for (int l = 1; l < level; ++l) {
        scale *= 2;
        radius = 2 * radius + 3;
    }
    const auto inside = [&](std::int64_t p) {
        return scale * p - radius >= 0 && scale * p + radius < kFootprintSize;
    };
    return inside(r) && inside(c);
}

CoverageReport compare_bank_to_full_image(const MemoryBank& bank, const Scene& scene, const EncoderWeights& weights,
                                          double tol) {
    const LevelFeatures full = encode_full_image_detached(scene, weights);
    CoverageReport report;

    struct LevelView {
        int level;
        const TensorPtr& mem;
        const TensorPtr& ref;
        const std::vector<std::uint8_t>& occ;
        std::int64_t block;  // block side at this level
    };
    const std::vector<LevelView> views = {
        {1, bank.level1, full.level1, bank.occ1, 16},
        {2, bank.level2, full.level2, bank.occ2, 8},
        {3, bank.level3, full.level3, bank.occ3, 4},
        {4, bank.bottleneck, full.bottleneck, bank.occ_b, 2},
    };

    for (const auto& v : views) {
        if (!v.mem) {
            continue;
        }
        const std::int64_t h = v.mem->shape[2], w = v.mem->shape[3];
        const std::int64_t ch = v.mem->shape[1];
        bool any_occupied = false;
        for (const auto o : v.occ) {
            any_occupied = any_occupied || o != 0;
        }
        if (!any_occupied) {
            report.match = false;
            continue;
        }
        for (std::int64_t r = 0; r < h; ++r) {
            for (std::int64_t c = 0; c < w; ++c) {
                if (!v.occ[static_cast<std::size_t>(r * w + c)]) {
                    report.match = false;
                    continue;
                }
                // Block-local coordinates: writes are block-aligned.
                if (!rf_inside_patch(v.level, r % v.block, c % v.block)) {
                    continue;
                }
                ++report.interior_positions;
                for (std::int64_t k = 0; k < ch; ++k) {
                    const auto idx = static_cast<std::size_t>((k * h + r) * w + c);
                    const double diff = std::abs(v.mem->data[idx] - v.ref->data[idx]);
                    report.max_abs_diff = std::max(report.max_abs_diff, diff);
                    if (diff > tol) {
                        report.match = false;
                    }
                }
            }
        }
    }
    return report;
}

bool coverage_equivalence_check(const Scene& scene, const EncoderWeights& weights, double tol) {
    if (scene.height % kFootprintSize != 0 || scene.width % kFootprintSize != 0) {
        throw ConfigError("coverage_equivalence_check requires scene sides divisible by 32");
    }
    NoGradGuard no_grad;
    EncoderConfig cfg;
    cfg.c1 = weights.s1_down.weight->shape[0];
    cfg.c2 = weights.s3_down.weight->shape[0];
    cfg.c3 = weights.s4_down.weight->shape[0];
    MemoryBank bank = MemoryBank::make(scene.height, scene.width, cfg);
    const std::int64_t px = scene.height * scene.width;
    for (std::int64_t top = 0; top + kFootprintSize <= scene.height; top += kFootprintSize) {
        for (std::int64_t left = 0; left + kFootprintSize <= scene.width; left += kFootprintSize) {
            // Full-resolution crops: the check isolates write geometry and
            // padding effects from the retina's intended periphery loss.
            std::vector<double> crop(static_cast<std::size_t>(3 * kFootprintSize * kFootprintSize));
            for (int ch = 0; ch < 3; ++ch) {
                for (std::int64_t r = 0; r < kFootprintSize; ++r) {
                    const double* src = scene.image.data() + ch * px + (top + r) * scene.width + left;
                    std::copy(src, src + kFootprintSize,
                              crop.begin() + (ch * kFootprintSize + r) * kFootprintSize);
                }
            }
            auto patch = Tensor::from_data({1, 3, kFootprintSize, kFootprintSize}, std::move(crop), false);
            bank.write(encode(patch, weights), top, left);
        }
    }
    return compare_bank_to_full_image(bank, scene, weights, tol).match;
}

} // namespace gae
