#include "gae/policy.hpp"

#include "gae/error.hpp"

namespace gae {

bool policy_selects_randomly(PolicyKind kind) { return kind != PolicyKind::AttentionArgmax; }

GlimpseAnchor select_next(const Tensor& heatmap, const VisitedMask& visited, PolicyKind kind, Rng& rng) {
    const std::int64_t rows = visited.rows, cols = visited.cols;
    if (policy_selects_randomly(kind)) {
        std::vector<std::int64_t> open;
        open.reserve(static_cast<std::size_t>(rows * cols));
        for (std::int64_t i = 0; i < rows * cols; ++i) {
            if (!visited.cells[static_cast<std::size_t>(i)]) {
                open.push_back(i);
            }
        }
        if (open.empty()) {
            throw ConfigError("select_next: every cell already visited (episode exhausted)");
        }
        const std::int64_t pick = open[rng.uniform_int(open.size())];
        return {pick / cols, pick % cols};
    }

    if (heatmap.shape.size() != 4 || heatmap.shape[2] != rows || heatmap.shape[3] != cols) {
        throw ConfigError("select_next: heatmap grid does not match the visited mask");
    }
    bool found = false;
    std::int64_t best = 0;
    double best_val = 0.0;
    for (std::int64_t i = 0; i < rows * cols; ++i) {
        if (visited.cells[static_cast<std::size_t>(i)]) {
            continue;
        }
        const double v = heatmap.data[static_cast<std::size_t>(i)];
        if (!found || v > best_val) {  // strict '>' keeps the row-major-first tie-break
            found = true;
            best = i;
            best_val = v;
        }
    }
    if (!found) {
        throw ConfigError("select_next: every cell already visited (episode exhausted)");
    }
    return {best / cols, best % cols};
}

GlimpseAnchor first_glimpse(Rng& rng, std::int64_t grid_rows, std::int64_t grid_cols) {
    const std::int64_t pick = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(grid_rows * grid_cols)));
    return {pick / grid_cols, pick % grid_cols};
}

} // namespace gae
