#include "gae/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "gae/error.hpp"

namespace gae {

std::int64_t ModelConfig::out_channels() const {
    switch (task) {
        case Task::Reconstruction: return 3;
        case Task::Segmentation: return seg_classes;
        case Task::Classification: return cls_classes;
    }
    throw ConfigError("unknown task");
}

GaeModel GaeModel::make(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.image_size % 32 != 0 || cfg.image_size < 32) {
        throw ConfigError("image_size must be a positive multiple of 32");
    }
    if (cfg.no_decoder && cfg.task != Task::Classification) {
        throw ConfigError("the no-decoder variant applies to classification only");
    }
    GaeModel m;
    m.cfg = cfg;
    Rng rng(derive_seed(seed, "init"));
    const std::int64_t grid_cells = cfg.grid_side() * cfg.grid_side();

    m.encoder = EncoderWeights::make(cfg.enc, rng);
    m.encoder.register_params(m.params, "encoder");

    if (cfg.no_decoder) {
        m.nodec = NoDecoderWeights::make(cfg.enc, grid_cells, cfg.out_channels(), rng);
        m.nodec->register_params(m.params, "nodec");
        return m;
    }

    if (cfg.contrast_stream) {
        m.contrastive = StreamWeights::make(false, cfg.enc, cfg.task, cfg.out_channels(), grid_cells, rng);
        m.contrastive->register_params(m.params, "contrastive");
    }
    m.self_attn = StreamWeights::make(true, cfg.enc, cfg.task, cfg.out_channels(), grid_cells, rng);
    m.self_attn->register_params(m.params, "self_attn");

    const std::int64_t fuse_in = cfg.contrast_stream ? 2 * cfg.enc.c1 : cfg.enc.c1;
    m.fusion = FusionWeights::make(cfg.task, fuse_in, cfg.out_channels(), rng);
    m.fusion->register_params(m.params, "fusion");
    return m;
}

StepOutputs GaeModel::forward_step(const MemoryBank& bank) const {
    StepOutputs out;
    if (cfg.no_decoder) {
        auto r = no_decoder_forward(bank, *nodec, cfg.sa_gating);
        out.o_t = r.logits;
        out.bottleneck_heatmap = r.bottleneck_heatmap;
        out.f_c.bottleneck = r.f_c_bottleneck;
        return out;
    }

    TensorPtr prehead_c;
    if (contrastive) {
        auto rc = stream_forward(bank, *contrastive, true);
        out.o_c = rc.output;
        out.f_c = rc.feats;
        prehead_c = rc.prehead;
    }
    auto rs = stream_forward(bank, *self_attn, cfg.sa_gating);
    out.o_s = rs.output;
    out.sa_maps = std::move(rs.attn_maps);
    out.bottleneck_heatmap = rs.bottleneck_heatmap;
    out.o_t = fuse_outputs(prehead_c, rs.prehead, *fusion, cfg.task);
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(bits >> (8 * i));
    }
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

ParameterList name_sorted(const ParameterList& params) {
    ParameterList sorted = params;
    std::sort(sorted.begin(), sorted.end(), [](const Parameter& a, const Parameter& b) { return a.name < b.name; });
    return sorted;
}

} // namespace

void save_checkpoint(const std::string& path, const ParameterList& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("save_checkpoint: cannot open " + path);
    }
    os.write("GAE1", 4);
    for (const auto& p : name_sorted(params)) {
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.tensor->shape.size()));
        for (const auto d : p.tensor->shape) {
            put_u32(os, static_cast<std::uint32_t>(d));
        }
        for (const double v : p.tensor->data) {
            put_f64(os, v);
        }
    }
    if (!os) {
        throw IoError("save_checkpoint: write failed for " + path);
    }
}

void load_checkpoint(const std::string& path, const ParameterList& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("load_checkpoint: cannot open " + path);
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GAE1", 4) != 0) {
        throw IoError("load_checkpoint: bad magic in " + path);
    }
    for (const auto& p : name_sorted(params)) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is || name != p.name) {
            throw IoError("load_checkpoint: expected parameter '" + p.name + "', found '" + name + "'");
        }
        const std::uint32_t rank = get_u32(is);
        if (rank != p.tensor->shape.size()) {
            throw IoError("load_checkpoint: rank mismatch for '" + p.name + "'");
        }
        for (std::uint32_t i = 0; i < rank; ++i) {
            if (static_cast<std::int64_t>(get_u32(is)) != p.tensor->shape[i]) {
                throw IoError("load_checkpoint: shape mismatch for '" + p.name + "'");
            }
        }
        for (auto& v : p.tensor->data) {
            v = get_f64(is);
        }
        if (!is) {
            throw IoError("load_checkpoint: truncated data for '" + p.name + "'");
        }
    }
}

} // namespace gae
