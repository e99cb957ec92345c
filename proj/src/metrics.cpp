#include "gae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "gae/error.hpp"
#include "gae/image_io.hpp"

namespace fs = std::filesystem;

namespace gae {

double rmse_255(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw ConfigError("rmse_255: shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = 255.0 * (pred[i] - target[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

double pixel_accuracy(const std::vector<std::int64_t>& pred, const std::vector<std::int64_t>& gt) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw ConfigError("pixel_accuracy: shape mismatch");
    }
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        hits += pred[i] == gt[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<std::int64_t> argmax_labels(const std::vector<double>& logits, std::int64_t classes, std::int64_t px) {
    if (static_cast<std::int64_t>(logits.size()) != classes * px) {
        throw ConfigError("argmax_labels: buffer does not match classes*px");
    }
    std::vector<std::int64_t> labels(static_cast<std::size_t>(px));
    for (std::int64_t i = 0; i < px; ++i) {
        std::int64_t best = 0;
        double best_val = logits[static_cast<std::size_t>(i)];
        for (std::int64_t k = 1; k < classes; ++k) {
            const double v = logits[static_cast<std::size_t>(k * px + i)];
            if (v > best_val) {
                best_val = v;
                best = k;
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
    return labels;
}

std::vector<double> glimpse_sample_mask(const std::vector<GlimpseAnchor>& anchors, std::int64_t height,
                                        std::int64_t width) {
    std::vector<double> mask(static_cast<std::size_t>(height * width), 0.0);
    for (const auto& a : anchors) {
        const std::int64_t top = clamp_footprint_origin(a.cell_row, height);
        const std::int64_t left = clamp_footprint_origin(a.cell_col, width);
        for_each_sampled_pixel(top, left,
                               [&](std::int64_t r, std::int64_t c) { mask[static_cast<std::size_t>(r * width + c)] = 1.0; });
    }
    return mask;
}

std::vector<double> average_glimpse_map(const std::vector<EpisodeTrace>& traces, std::int64_t height,
                                        std::int64_t width) {
    if (traces.empty()) {
        throw ConfigError("average_glimpse_map: no traces");
    }
    std::vector<double> mean(static_cast<std::size_t>(height * width), 0.0);
    for (const auto& t : traces) {
        const auto mask = glimpse_sample_mask(t.anchors, height, width);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += mask[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(traces.size());
    for (auto& v : mean) {
        v *= inv;
    }
    return mean;
}

namespace {

std::set<std::int64_t> visited_cells_excluding_first(const EpisodeTrace& trace, std::int64_t height,
                                                     std::int64_t width) {
    const std::int64_t grid_cols = width / kCellSize;
    auto footprint_cells = [&](const GlimpseAnchor& a) {
        const std::int64_t top_cell = clamp_footprint_origin(a.cell_row, height) / kCellSize;
        const std::int64_t left_cell = clamp_footprint_origin(a.cell_col, width) / kCellSize;
        std::set<std::int64_t> cells;
        for (std::int64_t dr = 0; dr < 2; ++dr) {
            for (std::int64_t dc = 0; dc < 2; ++dc) {
                cells.insert((top_cell + dr) * grid_cols + left_cell + dc);
            }
        }
        return cells;
    };
    const auto first = footprint_cells(trace.anchors.front());
    std::set<std::int64_t> cells;
    for (std::size_t i = 1; i < trace.anchors.size(); ++i) {
        for (const auto c : footprint_cells(trace.anchors[i])) {
            if (!first.count(c)) {
                cells.insert(c);
            }
        }
    }
    return cells;
}

double mean_pairwise_jaccard(const std::vector<std::set<std::int64_t>>& sets) {
    double total = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            std::vector<std::int64_t> inter, uni;
            std::set_intersection(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(),
                                  std::back_inserter(inter));
            std::set_union(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(), std::back_inserter(uni));
            total += uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
            ++pairs;
        }
    }
    return pairs > 0 ? total / static_cast<double>(pairs) : 1.0;
}

} // namespace

double init_agreement(GaeModel& model, const Scene& scene, const RunConfig& cfg, int n_runs) {
    if (n_runs < 2) {
        throw ConfigError("init_agreement requires n_runs >= 2");
    }
    std::vector<std::set<std::int64_t>> sets;
    for (int run = 0; run < n_runs; ++run) {
        // Different episode seeds give different random first glimpses.
        const auto trace = run_episode(scene, model, cfg, EpisodeMode::Eval,
                                       derive_seed(cfg.seed, "agreement", scene.seed, static_cast<std::uint64_t>(run)));
        sets.push_back(visited_cells_excluding_first(trace, scene.height, scene.width));
    }
    return mean_pairwise_jaccard(sets);
}

double random_policy_agreement_baseline(std::int64_t grid_rows, std::int64_t grid_cols, std::int64_t glimpses,
                                        int n_runs, int trials, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "agreement-mc"));
    double total = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<std::set<std::int64_t>> sets;
        for (int run = 0; run < n_runs; ++run) {
            VisitedMask mask = VisitedMask::make(grid_rows, grid_cols);
            std::set<std::int64_t> first;
            std::set<std::int64_t> rest;
            for (std::int64_t t = 0; t < glimpses; ++t) {
                std::vector<std::int64_t> open;
                for (std::int64_t i = 0; i < grid_rows * grid_cols; ++i) {
                    if (!mask.cells[static_cast<std::size_t>(i)]) {
                        open.push_back(i);
                    }
                }
                const std::int64_t pick = open[rng.uniform_int(open.size())];
                const GlimpseAnchor a{pick / grid_cols, pick % grid_cols};
                mark_visited(mask, a, grid_rows * kCellSize, grid_cols * kCellSize);
                const std::int64_t top = clamp_footprint_origin(a.cell_row, grid_rows * kCellSize) / kCellSize;
                const std::int64_t left = clamp_footprint_origin(a.cell_col, grid_cols * kCellSize) / kCellSize;
                for (std::int64_t dr = 0; dr < 2; ++dr) {
                    for (std::int64_t dc = 0; dc < 2; ++dc) {
                        const std::int64_t cell = (top + dr) * grid_cols + left + dc;
                        if (t == 0) {
                            first.insert(cell);
                        } else if (!first.count(cell)) {
                            rest.insert(cell);
                        }
                    }
                }
            }
            sets.push_back(rest);
        }
        total += mean_pairwise_jaccard(sets);
    }
    return total / static_cast<double>(trials);
}

std::vector<std::string> render_step_panel(const EpisodeTrace& trace, const Scene& scene, Task task,
                                           const std::string& out_dir) {
    if (trace.output_snapshots.size() != trace.anchors.size()) {
        throw ConfigError("render_step_panel: trace recorded without snapshots");
    }
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    const std::int64_t h = scene.height, w = scene.width;
    const std::int64_t grid = w / kCellSize;

    for (std::size_t t = 0; t < trace.anchors.size(); ++t) {
        const std::string step = std::to_string(t + 1);

        // Task output at this step: an image for reconstruction, an argmax
        // label visualization for segmentation, skipped shading for logits.
        std::string out_name = "step" + step + "_output";
        if (task == Task::Reconstruction) {
            out_name += ".ppm";
            std::vector<double> img = trace.output_snapshots[t];
            for (auto& v : img) {
                v = std::clamp(v, 0.0, 1.0);
            }
            write_ppm(out_dir + "/" + out_name, img, h, w);
        } else {
            out_name += ".pgm";
            std::vector<double> vis;
            if (task == Task::Segmentation) {
                const auto labels = argmax_labels(trace.output_snapshots[t],
                                                  static_cast<std::int64_t>(trace.output_snapshots[t].size()) / (h * w),
                                                  h * w);
                vis.assign(labels.begin(), labels.end());
            } else {
                vis = trace.output_snapshots[t];  // raw logits, normalized by the writer
            }
            write_pgm_normalized(out_dir + "/" + out_name,
                                 vis, task == Task::Classification ? 1 : h,
                                 task == Task::Classification ? static_cast<std::int64_t>(vis.size()) : w);
        }
        files.push_back(out_name);

        const std::string heat_name = "step" + step + "_heatmap.pgm";
        write_pgm_normalized(out_dir + "/" + heat_name, trace.heatmaps[t], grid, grid);
        files.push_back(heat_name);

        const std::string mask_name = "step" + step + "_glimpses.pgm";
        const std::vector<GlimpseAnchor> upto(trace.anchors.begin(), trace.anchors.begin() + static_cast<std::ptrdiff_t>(t + 1));
        write_pgm_normalized(out_dir + "/" + mask_name, glimpse_sample_mask(upto, h, w), h, w);
        files.push_back(mask_name);
    }

    std::ofstream manifest(out_dir + "/manifest.txt");
    for (const auto& f : files) {
        manifest << f << "\n";
    }
    return files;
}

} // namespace gae
