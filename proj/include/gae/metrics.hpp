#pragma once

#include <string>
#include <vector>

#include "gae/episode.hpp"

namespace gae {

struct MetricValue {
    std::string kind;  // RMSE_255 | mPA | accuracy
    double value = 0.0;
    std::int64_t n_samples = 0;
};

// sqrt(mean((255*pred - 255*target)^2)) over all pixels/channels; inputs in [0,1].
double rmse_255(const std::vector<double>& pred, const std::vector<double>& target);

// Fraction of pixels with pred == gt.
double pixel_accuracy(const std::vector<std::int64_t>& pred, const std::vector<std::int64_t>& gt);

// Channel-argmax of [K,H,W] logits (batch 1) into per-pixel labels.
std::vector<std::int64_t> argmax_labels(const std::vector<double>& logits, std::int64_t classes, std::int64_t px);

// Mean over traces of the binary sampled-pixel mask of each trace's glimpses.
std::vector<double> average_glimpse_map(const std::vector<EpisodeTrace>& traces, std::int64_t height,
                                        std::int64_t width);

// Binary mask of pixels sampled by the given anchors.
std::vector<double> glimpse_sample_mask(const std::vector<GlimpseAnchor>& anchors, std::int64_t height,
                                        std::int64_t width);

// Mean pairwise Jaccard of visited-cell sets over n_runs eval episodes whose
// first glimpse differs, excluding each run's first-footprint cells.
double init_agreement(GaeModel& model, const Scene& scene, const RunConfig& cfg, int n_runs);

// Monte-Carlo expectation of the same score under uniformly random selection.
double random_policy_agreement_baseline(std::int64_t grid_rows, std::int64_t grid_cols, std::int64_t glimpses,
                                        int n_runs, int trials, std::uint64_t seed);

// Per-step reconstruction / heatmap / cumulative-mask images plus a manifest.
// Requires a trace recorded with snapshots. Returns written file names.
std::vector<std::string> render_step_panel(const EpisodeTrace& trace, const Scene& scene, Task task,
                                           const std::string& out_dir);

} // namespace gae
