#include "gae/episode.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include <json.hpp>

#include "gae/error.hpp"
#include "gae/metrics.hpp"

namespace fs = std::filesystem;

namespace gae {

namespace {

void validate_run_config(const RunConfig& cfg) {
    if (cfg.glimpses < 1) {
        throw ConfigError("glimpses must be >= 1");
    }
    const std::int64_t grid_cells = (cfg.image_size / 16) * (cfg.image_size / 16);
    if (cfg.glimpses > grid_cells / 4) {
        throw ConfigError("glimpses exceeds the safe non-overlap bound (grid cells / 4)");
    }
    if (cfg.contrast && !cfg.contrast_stream && !cfg.no_decoder) {
        throw ConfigError("the contrast loss requires the contrastive stream");
    }
    if (cfg.batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
}

} // namespace

EpisodeTrace run_episode(const Scene& scene, GaeModel& model, const RunConfig& cfg, EpisodeMode mode,
                         std::uint64_t episode_seed, const EpisodeOptions& opts) {
    validate_run_config(cfg);
    if (scene.height != model.cfg.image_size || scene.width != model.cfg.image_size) {
        throw ConfigError("scene size does not match the model's image_size");
    }

    std::optional<NoGradGuard> no_grad;
    if (mode == EpisodeMode::Eval) {
        no_grad.emplace();
    }

    const Task task = cfg.task_enum();
    const PolicyKind policy = cfg.policy_enum();
    Rng rng(episode_seed);

    MemoryBank bank = model.make_bank();
    std::optional<PixelAudit> audit;
    if (opts.audit_pixels) {
        audit = PixelAudit::make(scene.height, scene.width);
    }

    // Teacher features computed once per training episode; they are built
    // without a graph, so no gradient can flow into the encoder through them.
    LevelFeatures teacher;
    const bool use_contrast = mode == EpisodeMode::Train && cfg.contrast;
    if (use_contrast) {
        teacher = encode_full_image_detached(scene, model.encoder);
    }

    EpisodeTrace trace;
    trace.scene_seed = scene.seed;
    trace.policy = policy;

    std::vector<TensorPtr> l_c, l_s, l_o;
    GlimpseAnchor anchor = first_glimpse(rng, bank.grid_rows(), bank.grid_cols());
    StepOutputs outs;

    for (std::int64_t t = 0; t < cfg.glimpses; ++t) {
        const RetinaGlimpse glimpse = extract_glimpse(scene, anchor, audit ? &*audit : nullptr);
        auto patch = Tensor::from_data({1, 3, kFootprintSize, kFootprintSize}, glimpse.reprojected, false);
        bank.write(encode(patch, model.encoder), glimpse.top, glimpse.left);
        mark_visited(bank.visited, anchor, scene.height, scene.width);
        trace.anchors.push_back(anchor);

        outs = model.forward_step(bank);
        trace.heatmaps.push_back(outs.bottleneck_heatmap->data);
        if (opts.record_snapshots) {
            trace.output_snapshots.push_back(outs.o_t->data);
        }

        if (mode == EpisodeMode::Train) {
            if (outs.o_c) {
                l_c.push_back(task_loss(outs.o_c, scene, task));
            }
            if (outs.o_s) {
                l_s.push_back(task_loss(outs.o_s, scene, task));
            }
            l_o.push_back(task_loss(outs.o_t, scene, task));
        }

        if (t + 1 < cfg.glimpses) {
            anchor = select_next(*outs.bottleneck_heatmap, bank.visited, policy, rng);
        }
    }
    trace.final_output = outs.o_t->data;

    if (mode == EpisodeMode::Train) {
        TensorPtr l_fc;
        if (use_contrast) {
            l_fc = contrastive_feature_loss(outs.f_c, teacher);
            trace.losses.l_fc = l_fc->item();
        }
        for (const auto& term : l_c) {
            trace.losses.l_c.push_back(term->item());
        }
        for (const auto& term : l_s) {
            trace.losses.l_s.push_back(term->item());
        }
        for (const auto& term : l_o) {
            trace.losses.l_o.push_back(term->item());
        }

        auto overall = aggregate_overall(l_fc, l_c, l_s, l_o, cfg.step_agg_enum());
        trace.losses.l_overall = overall->item();
        if (!std::isfinite(trace.losses.l_overall)) {
            throw NumericError("non-finite episode loss (scene seed " + std::to_string(scene.seed) + ")");
        }

        auto to_backward = opts.loss_scale == 1.0 ? overall : scale(overall, opts.loss_scale);
        to_backward->backward();
        if (opts.optimizer && opts.apply_optimizer_step) {
            opts.optimizer->step(model.params);
        }
    }

    if (audit) {
        trace.audited_unique_pixels = audit->unique_pixels;
    }
    return trace;
}

double scene_metric(const EpisodeTrace& trace, const Scene& scene, Task task) {
    switch (task) {
        case Task::Reconstruction: {
            std::vector<double> pred = trace.final_output;
            for (auto& v : pred) {
                v = std::clamp(v, 0.0, 1.0);
            }
            return rmse_255(pred, scene.image);
        }
        case Task::Segmentation: {
            const std::int64_t px = scene.height * scene.width;
            const auto classes = static_cast<std::int64_t>(trace.final_output.size()) / px;
            return pixel_accuracy(argmax_labels(trace.final_output, classes, px), scene.seg_labels);
        }
        case Task::Classification: {
            std::int64_t best = 0;
            for (std::size_t k = 1; k < trace.final_output.size(); ++k) {
                if (trace.final_output[k] > trace.final_output[static_cast<std::size_t>(best)]) {
                    best = static_cast<std::int64_t>(k);
                }
            }
            return best == scene.class_label ? 1.0 : 0.0;
        }
    }
    throw ConfigError("unknown task");
}

EvalResult evaluate_model(GaeModel& model, const std::vector<std::uint64_t>& eval_seeds, const RunConfig& cfg,
                          bool record_snapshots) {
    const Task task = cfg.task_enum();
    std::int64_t n = static_cast<std::int64_t>(eval_seeds.size());
    if (cfg.eval_episodes > 0) {
        n = std::min(n, cfg.eval_episodes);
    }
    std::vector<EpisodeTrace> traces(static_cast<std::size_t>(n));

    auto work = [&](std::int64_t i) {
        const std::uint64_t scene_seed = eval_seeds[static_cast<std::size_t>(i)];
        const Scene scene = generate(scene_seed, DatagenParams{cfg.image_size});
        EpisodeOptions opts;
        opts.audit_pixels = true;
        opts.record_snapshots = record_snapshots;
        auto trace = run_episode(scene, model, cfg, EpisodeMode::Eval,
                                 derive_seed(cfg.seed, "eval-episode", scene_seed), opts);
        trace.final_metric = scene_metric(trace, scene, task);
        traces[static_cast<std::size_t>(i)] = std::move(trace);
    };

    const std::int64_t workers = std::max<std::int64_t>(1, cfg.workers);
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i) {
            work(i);
        }
    } else {
        std::vector<std::thread> pool;
        for (std::int64_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                for (std::int64_t i = w; i < n; i += workers) {
                    work(i);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    EvalResult result;
    result.higher_is_better = task != Task::Reconstruction;
    double sum = 0.0;
    for (const auto& t : traces) {
        sum += t.final_metric;
    }
    result.metric = n > 0 ? sum / static_cast<double>(n) : 0.0;
    result.traces = std::move(traces);
    return result;
}

namespace {

struct TrainState {
    std::int64_t next_epoch = 0;
    std::int64_t episodes_done = 0;
    double best_metric = 0.0;
    bool has_best = false;
    std::int64_t evals_since_best = 0;
};

void save_progress(const std::string& path, const TrainState& st) {
    std::ofstream os(path);
    os << "next_epoch=" << st.next_epoch << "\n"
       << "episodes_done=" << st.episodes_done << "\n"
       << "best_metric=" << std::hexfloat << st.best_metric << std::defaultfloat << "\n"
       << "has_best=" << (st.has_best ? 1 : 0) << "\n"
       << "evals_since_best=" << st.evals_since_best << "\n";
}

bool load_progress(const std::string& path, TrainState& st) {
    std::ifstream is(path);
    if (!is) {
        return false;
    }
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "next_epoch") {
            st.next_epoch = std::stoll(value);
        } else if (key == "episodes_done") {
            st.episodes_done = std::stoll(value);
        } else if (key == "best_metric") {
            st.best_metric = std::strtod(value.c_str(), nullptr);
        } else if (key == "has_best") {
            st.has_best = value == "1";
        } else if (key == "evals_since_best") {
            st.evals_since_best = std::stoll(value);
        }
    }
    return true;
}

nlohmann::json trace_to_json(std::int64_t episode, std::int64_t epoch, const EpisodeTrace& trace,
                             const RunConfig& cfg) {
    nlohmann::json j;
    j["episode"] = episode;
    j["epoch"] = epoch;
    j["scene_seed"] = trace.scene_seed;
    j["policy"] = cfg.policy;
    auto anchors = nlohmann::json::array();
    for (const auto& a : trace.anchors) {
        anchors.push_back({a.cell_row, a.cell_col});
    }
    j["anchors"] = anchors;
    j["losses"] = {{"l_fc", trace.losses.l_fc},
                   {"l_c", trace.losses.l_c},
                   {"l_s", trace.losses.l_s},
                   {"l_o", trace.losses.l_o},
                   {"l_overall", trace.losses.l_overall}};
    return j;
}

bool metric_improved(double candidate, double incumbent, bool higher_is_better) {
    return higher_is_better ? candidate > incumbent : candidate < incumbent;
}

} // namespace

TrainArtifacts train_model(const SplitManifests& splits, const RunConfig& cfg, const std::string& run_dir,
                           bool resume) {
    validate_run_config(cfg);
    fs::create_directories(run_dir);
    write_resolved_config(run_dir + "/config.resolved", cfg);
    {
        std::ofstream os(run_dir + "/build_info.txt");
        os << GAE_BUILD_ID << "\n";
    }

    GaeModel model = GaeModel::make(cfg.model_config(), cfg.seed);
    AdamOptimizer adam(cfg.lr);
    const std::string ckpt_best = run_dir + "/checkpoint_best.gae";
    const std::string ckpt_last = run_dir + "/checkpoint_last.gae";
    const std::string optim_state = run_dir + "/optim_state.bin";
    const std::string progress = run_dir + "/progress.txt";

    TrainState st;
    bool resumed = false;
    if (resume && load_progress(progress, st)) {
        load_checkpoint(ckpt_last, model.params);
        std::ifstream is(optim_state, std::ios::binary);
        if (!is) {
            throw IoError("resume requested but optimizer state missing in " + run_dir);
        }
        adam.load_state(is, model.params);
        resumed = true;
    }

    const auto log_mode = resumed ? std::ios::app : std::ios::trunc;
    std::ofstream log(run_dir + "/training_log.csv", log_mode);
    std::ofstream journal(run_dir + "/journal.jsonl", log_mode);
    std::ofstream eval_log(run_dir + "/metrics.csv", log_mode);
    if (!resumed) {
        log << loss_csv_header() << "\n";
        eval_log << "epoch,metric\n";
    }

    TrainArtifacts art;
    art.run_dir = run_dir;
    art.best_checkpoint = ckpt_best;
    const bool higher_better = cfg.task_enum() != Task::Reconstruction;
    art.higher_is_better = higher_better;

    auto run_eval = [&](std::int64_t epoch) {
        EvalResult ev = evaluate_model(model, splits.eval_seeds, cfg);
        eval_log << epoch << "," << ev.metric << "\n" << std::flush;
        if (!st.has_best || metric_improved(ev.metric, st.best_metric, higher_better)) {
            st.best_metric = ev.metric;
            st.has_best = true;
            st.evals_since_best = 0;
            save_checkpoint(ckpt_best, model.params);
        } else {
            ++st.evals_since_best;
        }
    };

    if (!resumed) {
        // Baseline eval: guarantees a best checkpoint exists from the start.
        run_eval(-1);
    }

    const std::int64_t per_epoch = cfg.episodes_per_epoch > 0
                                       ? std::min<std::int64_t>(cfg.episodes_per_epoch,
                                                                static_cast<std::int64_t>(splits.train_seeds.size()))
                                       : static_cast<std::int64_t>(splits.train_seeds.size());

    for (std::int64_t epoch = st.next_epoch; epoch < cfg.epochs; ++epoch) {
        std::vector<std::uint64_t> order = splits.train_seeds;
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        for (std::int64_t i = 0; i < per_epoch; ++i) {
            const Scene scene = generate(order[static_cast<std::size_t>(i)], DatagenParams{cfg.image_size});
            EpisodeOptions opts;
            opts.optimizer = &adam;
            opts.loss_scale = 1.0 / static_cast<double>(cfg.batch_size);
            opts.apply_optimizer_step = ((i + 1) % cfg.batch_size == 0) || (i + 1 == per_epoch);
            EpisodeTrace trace;
            try {
                trace = run_episode(scene, model, cfg, EpisodeMode::Train,
                                    derive_seed(cfg.seed, "train-episode", static_cast<std::uint64_t>(epoch),
                                                static_cast<std::uint64_t>(i)),
                                    opts);
            } catch (const NumericError& e) {
                save_progress(progress, st);
                throw NumericError(std::string(e.what()) + "; aborting with last-good checkpoint at " +
                                   (st.has_best ? ckpt_best : std::string("<none>")));
            }
            const std::string line = loss_csv_line(epoch, st.episodes_done, trace.losses);
            log << line << "\n";
            journal << trace_to_json(st.episodes_done, epoch, trace, cfg).dump() << "\n";
            art.log_lines.push_back(line);
            ++st.episodes_done;
        }
        log << std::flush;
        journal << std::flush;

        run_eval(epoch);

        st.next_epoch = epoch + 1;
        save_checkpoint(ckpt_last, model.params);
        {
            std::ofstream os(optim_state, std::ios::binary);
            adam.save_state(os);
        }
        save_progress(progress, st);

        if (st.evals_since_best > cfg.patience) {
            break;
        }
    }

    art.best_metric = st.best_metric;
    art.episodes_run = st.episodes_done;
    return art;
}

std::vector<AblationRow> ablation_matrix(const SplitManifests& splits, const RunConfig& base,
                                         const std::string& run_dir) {
    struct VariantSpec {
        const char* name;
        const char* policy;
        bool sa_gating, contrast_stream, contrast;
    };
    const VariantSpec variants[] = {
        {"ours", "attn", true, true, true},
        {"no_contrast", "attn", true, true, false},
        {"random_sa", "random", true, true, true},
        {"random_no_sa", "random", false, true, true},
        {"random_no_sac", "random", false, false, false},
    };

    fs::create_directories(run_dir);
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        RunConfig cfg = base;
        cfg.policy = v.policy;
        cfg.sa_gating = v.sa_gating;
        cfg.contrast_stream = v.contrast_stream;
        cfg.contrast = v.contrast;

        const std::string dir = run_dir + "/" + v.name;
        TrainArtifacts art = train_model(splits, cfg, dir);

        GaeModel model = GaeModel::make(cfg.model_config(), cfg.seed);
        load_checkpoint(art.best_checkpoint, model.params);
        EvalResult ev = evaluate_model(model, splits.eval_seeds, cfg);

        AblationRow row;
        row.name = v.name;
        row.self_attention = v.sa_gating;
        row.contrast = v.contrast;
        row.metric = ev.metric;
        row.parameter_count = param_count(model.params);
        rows.push_back(row);
    }

    std::ofstream csv(run_dir + "/ablation.csv");
    csv << "variant,self_attention,contrast,metric,parameters\n";
    for (const auto& r : rows) {
        csv << r.name << "," << (r.self_attention ? 1 : 0) << "," << (r.contrast ? 1 : 0) << "," << r.metric << ","
            << r.parameter_count << "\n";
    }
    return rows;
}

std::vector<SweepPoint> glimpse_sweep(const SplitManifests& splits, const RunConfig& base,
                                      const std::vector<std::int64_t>& t_values,
                                      const std::vector<std::string>& policies, const std::string& run_dir) {
    fs::create_directories(run_dir);
    std::vector<SweepPoint> points;
    for (const auto& policy : policies) {
        for (const std::int64_t t : t_values) {
            RunConfig cfg = base;
            cfg.glimpses = t;
            cfg.policy = policy;
            const std::string dir = run_dir + "/" + policy + "_T" + std::to_string(t);
            TrainArtifacts art = train_model(splits, cfg, dir);

            GaeModel model = GaeModel::make(cfg.model_config(), cfg.seed);
            load_checkpoint(art.best_checkpoint, model.params);
            EvalResult ev = evaluate_model(model, splits.eval_seeds, cfg);
            points.push_back({t, policy, ev.metric});
        }
    }
    std::ofstream csv(run_dir + "/sweep.csv");
    csv << "glimpses,policy,metric\n";
    for (const auto& p : points) {
        csv << p.glimpses << "," << p.policy << "," << p.metric << "\n";
    }
    return points;
}

} // namespace gae
