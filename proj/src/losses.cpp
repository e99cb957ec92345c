#include "gae/losses.hpp"

#include <cstdio>

#include "gae/error.hpp"

namespace gae {

TensorPtr contrastive_feature_loss(const LevelFeatures& f_c, const LevelFeatures& f_i) {
    TensorPtr total;
    auto add_level = [&](const TensorPtr& pred, const TensorPtr& teacher) {
        if (!pred || !teacher) {
            return;
        }
        auto term = scale(cosine_similarity(pred, teacher), -1.0);
        total = total ? add(total, term) : term;
    };
    add_level(f_c.level1, f_i.level1);
    add_level(f_c.level2, f_i.level2);
    add_level(f_c.level3, f_i.level3);
    add_level(f_c.bottleneck, f_i.bottleneck);
    if (!total) {
        throw ConfigError("contrastive_feature_loss: no overlapping levels");
    }
    return total;
}

TensorPtr task_loss(const TensorPtr& output, const Scene& scene, Task task) {
    switch (task) {
        case Task::Reconstruction: {
            auto target = Tensor::from_data({1, 3, scene.height, scene.width}, scene.image, false);
            return mse_loss(output, target);
        }
        case Task::Segmentation:
            return softmax_cross_entropy_spatial(output, scene.seg_labels);
        case Task::Classification:
            return softmax_cross_entropy(output, {scene.class_label});
    }
    throw ConfigError("unknown task");
}

namespace {

TensorPtr aggregate_steps(const std::vector<TensorPtr>& terms, StepAgg agg) {
    if (terms.empty()) {
        return nullptr;
    }
    TensorPtr total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) {
        total = add(total, terms[i]);
    }
    if (agg == StepAgg::Mean) {
        total = scale(total, 1.0 / static_cast<double>(terms.size()));
    }
    return total;
}

} // namespace

TensorPtr aggregate_overall(const TensorPtr& l_fc, const std::vector<TensorPtr>& l_c,
                            const std::vector<TensorPtr>& l_s, const std::vector<TensorPtr>& l_o, StepAgg agg) {
    TensorPtr total = l_fc;
    for (const auto* terms : {&l_c, &l_s, &l_o}) {
        auto part = aggregate_steps(*terms, agg);
        if (part) {
            total = total ? add(total, part) : part;
        }
    }
    if (!total) {
        throw ConfigError("aggregate_overall: nothing to aggregate");
    }
    return total;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (const double x : xs) {
        s += x;
    }
    return s / static_cast<double>(xs.size());
}

std::string loss_csv_header() { return "epoch,episode,l_fc,mean_l_c,mean_l_s,mean_l_o,l_overall"; }

std::string loss_csv_line(std::int64_t epoch, std::int64_t episode, const LossBreakdown& b) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g", static_cast<long long>(epoch),
                  static_cast<long long>(episode), b.l_fc, mean_of(b.l_c), mean_of(b.l_s), mean_of(b.l_o),
                  b.l_overall);
    return buf;
}

} // namespace gae
