#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gae/encoder.hpp"
#include "gae/nn.hpp"
#include "gae/tensor.hpp"

namespace gae {

enum class Task { Reconstruction, Segmentation, Classification };

struct AttentionLayerOutput {
    TensorPtr raw_features;   // conv channels [0,C)
    TensorPtr attention_map;  // ReLU of the extra channel, >= 0
    TensorPtr attended;       // raw * map (or raw when the gate is disabled)
};

// One conv produces C+1 channels; the extra channel becomes the non-negative
// attention map multiplying the raw features. With gate_enabled=false the map
// is still computed but not applied (the "extra channel" ablation, which keeps
// the layer's parameter count identical).
AttentionLayerOutput attention_layer(const TensorPtr& input, const Conv2dLayer& conv, bool gate_enabled);

// One U-shaped decoder over the memory bank. The contrastive stream uses plain
// conv+ReLU levels (symmetric to the encoder); the self-attention stream uses
// attention layers at every level plus the fully-connected bottleneck heatmap.
struct StreamWeights {
    bool attention = false;
    Conv2dLayer bott;   // c3 -> c3 (+1 if attention)
    Conv2dLayer dec3;   // c3+c2 -> c2 (+1)
    Conv2dLayer dec2;   // c2+c1 -> c1 (+1)
    Conv2dLayer dec1;   // c1+c1 -> c1 (+1)
    std::optional<Conv2dLayer> head;     // dense tasks: c1 -> out_channels, k3
    std::optional<LinearLayer> head_fc;  // classification: c1 -> classes on pooled features
    std::optional<LinearLayer> heatmap_fc;  // attention only: c3*G*G -> G*G

    static StreamWeights make(bool attention, const EncoderConfig& cfg, Task task, std::int64_t out_channels,
                              std::int64_t grid_cells, Rng& rng);
    void register_params(ParameterList& out, const std::string& prefix) const;
};

struct StreamResult {
    LevelFeatures feats;      // decoder outputs per level (F_C for the contrastive stream)
    TensorPtr prehead;        // [B,c1,H,W] features entering the task head
    TensorPtr output;         // O_C / O_S, task-shaped
    std::vector<TensorPtr> attn_maps;   // per-level maps (bott, l3, l2, l1); attention streams only
    TensorPtr bottleneck_heatmap;       // FC heatmap [B,1,G,G]; attention streams only
};

StreamResult stream_forward(const MemoryBank& bank, const StreamWeights& weights, bool gate_enabled);

// Classification-only variant: both streams restricted to the bottleneck, the
// decoder and intermediate memories removed.
struct NoDecoderWeights {
    LinearLayer heatmap_fc;     // c3*G*G -> G*G
    Conv2dLayer contrast_proj;  // c3 -> c3, predicts full-image bottleneck features
    LinearLayer classifier;     // 2*c3 pooled -> classes

    static NoDecoderWeights make(const EncoderConfig& cfg, std::int64_t grid_cells, std::int64_t classes, Rng& rng);
    void register_params(ParameterList& out, const std::string& prefix) const;
};

struct NoDecoderResult {
    TensorPtr logits;
    TensorPtr bottleneck_heatmap;
    TensorPtr f_c_bottleneck;  // contrastive prediction of the full-image bottleneck
};

NoDecoderResult no_decoder_forward(const MemoryBank& bank, const NoDecoderWeights& weights, bool gate_enabled);

// Fusion of the two streams' pre-head features into O_t: 1x1 conv for dense
// tasks, joint linear head for classification.
struct FusionWeights {
    std::optional<Conv2dLayer> conv;
    std::optional<LinearLayer> fc;

    static FusionWeights make(Task task, std::int64_t in_channels, std::int64_t out_channels, Rng& rng);
    void register_params(ParameterList& out, const std::string& prefix) const;
};

TensorPtr fuse_outputs(const TensorPtr& prehead_c, const TensorPtr& prehead_s, const FusionWeights& fusion,
                       Task task);

} // namespace gae
