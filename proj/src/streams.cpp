#include "gae/streams.hpp"

#include "gae/error.hpp"

namespace gae {

AttentionLayerOutput attention_layer(const TensorPtr& input, const Conv2dLayer& conv, bool gate_enabled) {
    const std::int64_t ch = conv.weight->shape[0] - 1;
    auto full = conv.forward(input);
    AttentionLayerOutput out;
    out.raw_features = slice_channels(full, 0, ch);
    out.attention_map = relu(slice_channels(full, ch, ch + 1));
    out.attended = gate_enabled ? elementwise_mul_broadcast(out.raw_features, out.attention_map)
                                : out.raw_features;
    return out;
}

StreamWeights StreamWeights::make(bool attention, const EncoderConfig& cfg, Task task, std::int64_t out_channels,
                                  std::int64_t grid_cells, Rng& rng) {
    StreamWeights w;
    w.attention = attention;
    const std::int64_t extra = attention ? 1 : 0;
    w.bott = Conv2dLayer::make(cfg.c3, cfg.c3 + extra, 3, 1, 1, rng);
    w.dec3 = Conv2dLayer::make(cfg.c3 + cfg.c2, cfg.c2 + extra, 3, 1, 1, rng);
    w.dec2 = Conv2dLayer::make(cfg.c2 + cfg.c1, cfg.c1 + extra, 3, 1, 1, rng);
    w.dec1 = Conv2dLayer::make(cfg.c1 + cfg.c1, cfg.c1 + extra, 3, 1, 1, rng);
    if (task == Task::Classification) {
        w.head_fc = LinearLayer::make(cfg.c1, out_channels, rng);
    } else {
        w.head = Conv2dLayer::make(cfg.c1, out_channels, 3, 1, 1, rng);
    }
    if (attention) {
        w.heatmap_fc = LinearLayer::make(cfg.c3 * grid_cells, grid_cells, rng);
    }
    return w;
}

void StreamWeights::register_params(ParameterList& out, const std::string& prefix) const {
    bott.register_params(out, prefix + ".bott");
    dec3.register_params(out, prefix + ".dec3");
    dec2.register_params(out, prefix + ".dec2");
    dec1.register_params(out, prefix + ".dec1");
    if (head) {
        head->register_params(out, prefix + ".head");
    }
    if (head_fc) {
        head_fc->register_params(out, prefix + ".head_fc");
    }
    if (heatmap_fc) {
        heatmap_fc->register_params(out, prefix + ".heatmap_fc");
    }
}

namespace {

TensorPtr fc_heatmap(const TensorPtr& bottleneck_mem, const LinearLayer& fc) {
    const std::int64_t gh = bottleneck_mem->shape[2], gw = bottleneck_mem->shape[3];
    auto flat = reshape(bottleneck_mem, {1, bottleneck_mem->shape[1] * gh * gw});
    return relu(reshape(fc.forward(flat), {1, 1, gh, gw}));
}

} // namespace

StreamResult stream_forward(const MemoryBank& bank, const StreamWeights& w, bool gate_enabled) {
    if (bank.bottleneck_only) {
        throw ConfigError("stream_forward requires a full memory bank");
    }
    StreamResult r;

    TensorPtr x = bank.bottleneck;
    if (w.attention) {
        // The policy heatmap; gating it into the decoder is what lets the
        // downstream task loss train the fully-connected layer.
        r.bottleneck_heatmap = fc_heatmap(bank.bottleneck, *w.heatmap_fc);
        if (gate_enabled) {
            x = elementwise_mul_broadcast(x, r.bottleneck_heatmap);
        }
    }

    auto level = [&](const Conv2dLayer& conv, const TensorPtr& input) {
        if (w.attention) {
            auto att = attention_layer(input, conv, gate_enabled);
            r.attn_maps.push_back(att.attention_map);
            return att.attended;
        }
        return relu(conv.forward(input));
    };

    r.feats.bottleneck = level(w.bott, x);
    r.feats.level3 = level(w.dec3, concat_channels(upsample_nearest2x(r.feats.bottleneck), bank.level3));
    r.feats.level2 = level(w.dec2, concat_channels(upsample_nearest2x(r.feats.level3), bank.level2));
    r.feats.level1 = level(w.dec1, concat_channels(upsample_nearest2x(r.feats.level2), bank.level1));
    r.prehead = upsample_nearest2x(r.feats.level1);

    if (w.head) {
        r.output = w.head->forward(r.prehead);
    } else {
        r.output = w.head_fc->forward(global_avg_pool(r.prehead));
    }
    return r;
}

NoDecoderWeights NoDecoderWeights::make(const EncoderConfig& cfg, std::int64_t grid_cells, std::int64_t classes,
                                        Rng& rng) {
    NoDecoderWeights w;
    w.heatmap_fc = LinearLayer::make(cfg.c3 * grid_cells, grid_cells, rng);
    w.contrast_proj = Conv2dLayer::make(cfg.c3, cfg.c3, 3, 1, 1, rng);
    w.classifier = LinearLayer::make(2 * cfg.c3, classes, rng);
    return w;
}

void NoDecoderWeights::register_params(ParameterList& out, const std::string& prefix) const {
    heatmap_fc.register_params(out, prefix + ".heatmap_fc");
    contrast_proj.register_params(out, prefix + ".contrast_proj");
    classifier.register_params(out, prefix + ".classifier");
}

NoDecoderResult no_decoder_forward(const MemoryBank& bank, const NoDecoderWeights& w, bool gate_enabled) {
    NoDecoderResult r;
    r.bottleneck_heatmap = fc_heatmap(bank.bottleneck, w.heatmap_fc);
    TensorPtr gated = gate_enabled ? elementwise_mul_broadcast(bank.bottleneck, r.bottleneck_heatmap)
                                   : bank.bottleneck;
    r.f_c_bottleneck = relu(w.contrast_proj.forward(bank.bottleneck));
    auto pooled = global_avg_pool(concat_channels(gated, r.f_c_bottleneck));
    r.logits = w.classifier.forward(pooled);
    return r;
}

FusionWeights FusionWeights::make(Task task, std::int64_t in_channels, std::int64_t out_channels, Rng& rng) {
    FusionWeights f;
    if (task == Task::Classification) {
        f.fc = LinearLayer::make(in_channels, out_channels, rng);
    } else {
        f.conv = Conv2dLayer::make(in_channels, out_channels, 1, 1, 0, rng);
    }
    return f;
}

void FusionWeights::register_params(ParameterList& out, const std::string& prefix) const {
    if (conv) {
        conv->register_params(out, prefix + ".conv");
    }
    if (fc) {
        fc->register_params(out, prefix + ".fc");
    }
}

TensorPtr fuse_outputs(const TensorPtr& prehead_c, const TensorPtr& prehead_s, const FusionWeights& fusion,
                       Task task) {
    TensorPtr joint = prehead_c ? concat_channels(prehead_c, prehead_s) : prehead_s;
    if (task == Task::Classification) {
        return fusion.fc->forward(global_avg_pool(joint));
    }
    return fusion.conv->forward(joint);
}

} // namespace gae
