#pragma once

#include <cstdint>
#include <string>

#include "gae/losses.hpp"
#include "gae/model.hpp"
#include "gae/policy.hpp"

namespace gae {

// Every field is settable from a key=value config file and from CLI flags.
struct RunConfig {
    std::string task = "recon";   // recon | seg | cls
    std::int64_t glimpses = 8;    // T
    std::int64_t image_size = 128;
    std::int64_t c1 = 16, c2 = 32, c3 = 64;
    double lr = 1e-3;
    std::int64_t epochs = 3;
    std::int64_t batch_size = 4;
    std::uint64_t seed = 1;
    std::string policy = "attn";  // attn | random
    bool contrast = true;         // Eq. 1 loss on/off (No Contrast ablation)
    bool contrast_stream = true;  // decoder stream present (No SAC drops it)
    bool sa_gating = true;        // attention maps applied (No SA disables)
    bool no_decoder = false;      // classification bottleneck-only variant
    std::string step_agg = "mean";  // mean | sum
    std::int64_t n_train = 2000;
    std::int64_t n_eval = 200;
    std::int64_t episodes_per_epoch = 0;  // 0 = every train scene each epoch
    std::int64_t eval_episodes = 0;       // 0 = every eval scene
    std::int64_t patience = 10;           // early-stop patience in evals
    std::int64_t workers = 1;

    Task task_enum() const;
    PolicyKind policy_enum() const;
    StepAgg step_agg_enum() const;
    ModelConfig model_config() const;

    void apply(const std::string& key, const std::string& value);
    std::string canonical_text() const;
    std::string config_hash() const;

    static RunConfig from_file(const std::string& path);
};

void write_resolved_config(const std::string& path, const RunConfig& cfg);

} // namespace gae
