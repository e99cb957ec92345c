#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gae/config.hpp"
#include "gae/losses.hpp"
#include "gae/model.hpp"
#include "gae/optim.hpp"
#include "gae/policy.hpp"

namespace gae {

enum class EpisodeMode { Train, Eval };

struct EpisodeTrace {
    std::uint64_t scene_seed = 0;
    PolicyKind policy = PolicyKind::AttentionArgmax;
    std::vector<GlimpseAnchor> anchors;               // length T
    std::vector<std::vector<double>> heatmaps;        // per-step bottleneck heatmap (grid values)
    std::vector<std::vector<double>> output_snapshots;  // per-step O_t copies (opt-in)
    std::vector<double> final_output;                 // O_t after step T
    LossBreakdown losses;
    double final_metric = 0.0;
    std::int64_t audited_unique_pixels = -1;          // -1 when auditing was off
};

struct EpisodeOptions {
    bool record_snapshots = false;
    bool audit_pixels = false;
    AdamOptimizer* optimizer = nullptr;
    bool apply_optimizer_step = true;
    double loss_scale = 1.0;  // gradient-accumulation weight for this episode
};

// One T-step explore-decode-select loop. Train mode records per-step losses,
// computes L_Fc against the detached full-image features after the last step,
// and backpropagates L_overall once. Eval mode runs without gradients and
// never reads scene pixels except through the retina (auditable).
EpisodeTrace run_episode(const Scene& scene, GaeModel& model, const RunConfig& cfg, EpisodeMode mode,
                         std::uint64_t episode_seed, const EpisodeOptions& opts = {});

struct EvalResult {
    double metric = 0.0;
    bool higher_is_better = false;
    std::vector<EpisodeTrace> traces;
};

// Mean task metric over the eval scenes: RMSE[0,255] (recon), mPA (seg),
// accuracy (cls). Parallel over scenes when cfg.workers > 1; results are
// independent of worker count.
EvalResult evaluate_model(GaeModel& model, const std::vector<std::uint64_t>& eval_seeds, const RunConfig& cfg,
                          bool record_snapshots = false);

double scene_metric(const EpisodeTrace& trace, const Scene& scene, Task task);

struct TrainArtifacts {
    std::string run_dir;
    std::string best_checkpoint;
    double best_metric = 0.0;
    bool higher_is_better = false;
    std::int64_t episodes_run = 0;
    std::vector<std::string> log_lines;
};

// Epochs x episodes loop with per-epoch held-out evaluation, best-metric
// checkpointing, early stopping, and exact-resume state. resume=true picks up
// from the last epoch boundary recorded in run_dir.
TrainArtifacts train_model(const SplitManifests& splits, const RunConfig& cfg, const std::string& run_dir,
                           bool resume = false);

struct AblationRow {
    std::string name;
    bool self_attention = false;
    bool contrast = false;
    double metric = 0.0;
    std::int64_t parameter_count = 0;
};

// The five Table-1 variants under identical seeds and budgets; writes
// ablation.csv into run_dir.
std::vector<AblationRow> ablation_matrix(const SplitManifests& splits, const RunConfig& base,
                                         const std::string& run_dir);

struct SweepPoint {
    std::int64_t glimpses = 0;
    std::string policy;
    double metric = 0.0;
};

// Trains and evaluates one model per (T, policy); writes sweep.csv.
std::vector<SweepPoint> glimpse_sweep(const SplitManifests& splits, const RunConfig& base,
                                      const std::vector<std::int64_t>& t_values,
                                      const std::vector<std::string>& policies, const std::string& run_dir);

} // namespace gae
