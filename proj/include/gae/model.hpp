#pragma once

#include <optional>
#include <string>

#include "gae/streams.hpp"

namespace gae {

struct ModelConfig {
    Task task = Task::Reconstruction;
    std::int64_t image_size = 128;
    EncoderConfig enc;
    std::int64_t seg_classes = 5;
    std::int64_t cls_classes = 4;
    bool contrast_stream = true;  // false drops the whole contrastive decoder (No SAC)
    bool sa_gating = true;        // false turns attention layers into plain extra-channel convs (No SA)
    bool no_decoder = false;      // classification-only bottleneck variant

    std::int64_t out_channels() const;
    std::int64_t grid_side() const { return image_size / 16; }
};

struct StepOutputs {
    TensorPtr o_c, o_s, o_t;  // o_c/o_s null when the producing stream is absent
    LevelFeatures f_c;        // contrastive prediction (bottleneck-only in the no-decoder variant)
    std::vector<TensorPtr> sa_maps;
    TensorPtr bottleneck_heatmap;
};

struct GaeModel {
    ModelConfig cfg;
    EncoderWeights encoder;
    std::optional<StreamWeights> contrastive;
    std::optional<StreamWeights> self_attn;
    std::optional<FusionWeights> fusion;
    std::optional<NoDecoderWeights> nodec;
    ParameterList params;

    static GaeModel make(const ModelConfig& cfg, std::uint64_t seed);

    MemoryBank make_bank() const {
        return MemoryBank::make(cfg.image_size, cfg.image_size, cfg.enc, cfg.no_decoder);
    }

    StepOutputs forward_step(const MemoryBank& bank) const;
};

// Checkpoint format: magic "GAE1", then for each parameter in name-sorted
// order: u32 LE name length, name bytes, u32 rank, u32 dims, raw f64 LE data.
void save_checkpoint(const std::string& path, const ParameterList& params);
void load_checkpoint(const std::string& path, const ParameterList& params);

} // namespace gae
