#pragma once

#include <vector>

#include "gae/datagen.hpp"
#include "gae/encoder.hpp"
#include "gae/streams.hpp"

namespace gae {

enum class StepAgg { Mean, Sum };

struct LossBreakdown {
    double l_fc = 0.0;
    std::vector<double> l_c, l_s, l_o;  // one entry per step
    double l_overall = 0.0;
};

// Sum over levels of the negative cosine between flattened predicted and
// teacher features; the teacher side must already be gradient-blocked. Null
// levels are skipped (bottleneck-only variant contributes one term).
TensorPtr contrastive_feature_loss(const LevelFeatures& f_c, const LevelFeatures& f_i);

// Reconstruction: MSE on [0,1] pixels. Segmentation: mean pixelwise CE.
// Classification: CE on logits.
TensorPtr task_loss(const TensorPtr& output, const Scene& scene, Task task);

// L_overall = L_Fc + agg_t L_C + agg_t L_S + agg_t L_O (agg = mean by default).
// Null l_fc and empty lists contribute zero.
TensorPtr aggregate_overall(const TensorPtr& l_fc, const std::vector<TensorPtr>& l_c,
                            const std::vector<TensorPtr>& l_s, const std::vector<TensorPtr>& l_o, StepAgg agg);

double mean_of(const std::vector<double>& xs);

// CSV training-log line: epoch, episode, L_Fc, mean L_C, mean L_S, mean L_O, L_overall.
std::string loss_csv_header();
std::string loss_csv_line(std::int64_t epoch, std::int64_t episode, const LossBreakdown& b);

} // namespace gae
