#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gae/config.hpp"
#include "gae/episode.hpp"
#include "gae/error.hpp"
#include "gae/gradcheck.hpp"
#include "gae/image_io.hpp"
#include "gae/metrics.hpp"
#include "gae/model.hpp"

namespace fs = std::filesystem;
using namespace gae;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "runs";
    std::string task;
    std::string policy;
    std::int64_t seed = -1;
    std::int64_t glimpses = -1;
    bool no_contrast = false;
    bool no_decoder = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key=value config file");
    cmd->add_option("--out", flags.out_dir, "output directory (overridden by $GAE_RUN_DIR)");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--task", flags.task)->check(CLI::IsMember({"recon", "seg", "cls"}));
    cmd->add_option("--policy", flags.policy)->check(CLI::IsMember({"attn", "random"}));
    cmd->add_option("--glimpses", flags.glimpses, "glimpses per episode (T)");
    cmd->add_flag("--no-contrast", flags.no_contrast, "drop the contrastive loss");
    cmd->add_flag("--no-decoder", flags.no_decoder, "bottleneck-only classification variant");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = RunConfig::from_file(flags.config_path);
    }
    if (!flags.task.empty()) {
        cfg.task = flags.task;
    }
    if (!flags.policy.empty()) {
        cfg.policy = flags.policy;
    }
    if (flags.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(flags.seed);
    }
    if (flags.glimpses > 0) {
        cfg.glimpses = flags.glimpses;
    }
    if (flags.no_contrast) {
        cfg.contrast = false;
    }
    if (flags.no_decoder) {
        cfg.no_decoder = true;
        cfg.task = "cls";
        cfg.contrast_stream = false;
    }
    return cfg;
}

std::string base_out_dir(const CommonFlags& flags) {
    if (const char* env = std::getenv("GAE_RUN_DIR")) {
        return env;
    }
    return flags.out_dir;
}

std::string run_dir_for(const CommonFlags& flags, const RunConfig& cfg, const std::string& command) {
    return base_out_dir(flags) + "/" + command + "-" + cfg.config_hash();
}

RunConfig config_of_run(const std::string& run_dir) {
    return RunConfig::from_file(run_dir + "/config.resolved");
}

GaeModel load_model(const std::string& run_dir, const RunConfig& cfg, const std::string& checkpoint) {
    GaeModel model = GaeModel::make(cfg.model_config(), cfg.seed);
    const std::string path = checkpoint.empty() ? run_dir + "/checkpoint_best.gae" : checkpoint;
    load_checkpoint(path, model.params);
    return model;
}

int cmd_gradcheck() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = run_gradcheck_suite(1234);
    double worst = 0.0;
    for (const auto& r : results) {
        std::printf("%-32s instances=%d  max_rel_err=%.3e\n", r.op.c_str(), r.instances, r.max_rel_err);
        worst = std::max(worst, r.max_rel_err);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = gradcheck_all_pass(results);
    std::printf("gradcheck: %zu ops, worst rel err %.3e, %.2fs -> %s\n", results.size(), worst, secs,
                ok ? "PASS" : "FAIL");
    return ok ? 0 : NumericError::exit_code;
}

int cmd_gen_data(const CommonFlags& flags, std::int64_t export_scenes) {
    const RunConfig cfg = resolve_config(flags);
    const std::string dir = run_dir_for(flags, cfg, "data");
    fs::create_directories(dir);
    write_resolved_config(dir + "/config.resolved", cfg);

    const auto splits = make_splits(cfg.n_train, cfg.n_eval, cfg.seed, DatagenParams{cfg.image_size});
    write_manifest(dir + "/train.manifest", splits.train_seeds, splits.params);
    write_manifest(dir + "/eval.manifest", splits.eval_seeds, splits.params);
    for (std::int64_t i = 0; i < std::min<std::int64_t>(export_scenes, cfg.n_eval); ++i) {
        const Scene s = generate(splits.eval_seeds[static_cast<std::size_t>(i)], splits.params);
        write_ppm(dir + "/eval_scene_" + std::to_string(i) + ".ppm", s.image, s.height, s.width);
    }
    std::printf("wrote manifests for %lld train / %lld eval scenes to %s\n",
                static_cast<long long>(cfg.n_train), static_cast<long long>(cfg.n_eval), dir.c_str());
    return 0;
}

int cmd_train(const CommonFlags& flags, bool resume, const std::string& run_override) {
    const RunConfig cfg = resolve_config(flags);
    const std::string dir = run_override.empty() ? run_dir_for(flags, cfg, "train") : run_override;
    const auto splits = make_splits(cfg.n_train, cfg.n_eval, cfg.seed, DatagenParams{cfg.image_size});
    const auto art = train_model(splits, cfg, dir, resume);
    std::printf("run dir: %s\nepisodes: %lld\nbest %s: %.6f\ncheckpoint: %s\n", dir.c_str(),
                static_cast<long long>(art.episodes_run), art.higher_is_better ? "metric (higher better)" : "RMSE",
                art.best_metric, art.best_checkpoint.c_str());
    return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& checkpoint, std::int64_t workers) {
    RunConfig cfg = config_of_run(run_dir);
    if (workers > 0) {
        cfg.workers = workers;
    }
    cfg.eval_episodes = 0;  // full eval split
    GaeModel model = load_model(run_dir, cfg, checkpoint);
    const auto splits = make_splits(cfg.n_train, cfg.n_eval, cfg.seed, DatagenParams{cfg.image_size});
    const auto ev = evaluate_model(model, splits.eval_seeds, cfg);

    std::ofstream csv(run_dir + "/eval_metrics.csv");
    csv << "metric,value,n_samples\n";
    const char* kind = cfg.task == "recon" ? "RMSE_255" : (cfg.task == "seg" ? "mPA" : "accuracy");
    csv << kind << "," << ev.metric << "," << ev.traces.size() << "\n";

    const auto map = average_glimpse_map(ev.traces, cfg.image_size, cfg.image_size);
    write_pgm_normalized(run_dir + "/average_glimpse_map.pgm", map, cfg.image_size, cfg.image_size);

    std::printf("%s over %zu scenes: %.6f\n", kind, ev.traces.size(), ev.metric);
    return 0;
}

int cmd_ablate(const CommonFlags& flags) {
    const RunConfig cfg = resolve_config(flags);
    const std::string dir = run_dir_for(flags, cfg, "ablate");
    const auto splits = make_splits(cfg.n_train, cfg.n_eval, cfg.seed, DatagenParams{cfg.image_size});
    const auto rows = ablation_matrix(splits, cfg, dir);
    std::printf("%-16s %-5s %-8s %-12s %s\n", "variant", "SA", "contrast", "metric", "params");
    for (const auto& r : rows) {
        std::printf("%-16s %-5s %-8s %-12.6f %lld\n", r.name.c_str(), r.self_attention ? "yes" : "no",
                    r.contrast ? "yes" : "no", r.metric, static_cast<long long>(r.parameter_count));
    }
    std::printf("table: %s/ablation.csv\n", dir.c_str());
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& t_list) {
    const RunConfig cfg = resolve_config(flags);
    const std::string dir = run_dir_for(flags, cfg, "sweep");
    std::vector<std::int64_t> t_values;
    std::string token;
    std::stringstream ss(t_list);
    while (std::getline(ss, token, ',')) {
        t_values.push_back(std::stoll(token));
    }
    const auto splits = make_splits(cfg.n_train, cfg.n_eval, cfg.seed, DatagenParams{cfg.image_size});
    const auto points = glimpse_sweep(splits, cfg, t_values, {"attn", "random"}, dir);
    for (const auto& p : points) {
        std::printf("T=%lld policy=%s metric=%.6f\n", static_cast<long long>(p.glimpses), p.policy.c_str(),
                    p.metric);
    }
    std::printf("curve: %s/sweep.csv\n", dir.c_str());
    return 0;
}

int cmd_analyze(const std::string& run_dir, std::int64_t n_scenes, int n_runs) {
    RunConfig cfg = config_of_run(run_dir);
    const std::string run_hash = cfg.config_hash();
    cfg.eval_episodes = 0;
    GaeModel model = load_model(run_dir, cfg, "");
    const auto splits = make_splits(cfg.n_train, cfg.n_eval, cfg.seed, DatagenParams{cfg.image_size});

    const auto ev = evaluate_model(model, splits.eval_seeds, cfg);
    const auto map = average_glimpse_map(ev.traces, cfg.image_size, cfg.image_size);
    write_pgm_normalized(run_dir + "/average_glimpse_map.pgm", map, cfg.image_size, cfg.image_size);

    // Agreement of final glimpse placement across random first glimpses.
    const std::int64_t n = std::min<std::int64_t>(n_scenes, static_cast<std::int64_t>(splits.eval_seeds.size()));
    double agreement = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const Scene scene = generate(splits.eval_seeds[static_cast<std::size_t>(i)], DatagenParams{cfg.image_size});
        agreement += init_agreement(model, scene, cfg, n_runs);
    }
    agreement /= static_cast<double>(n);
    const double baseline = random_policy_agreement_baseline(cfg.image_size / 16, cfg.image_size / 16, cfg.glimpses,
                                                             n_runs, 2000, cfg.seed);

    // Heatmap attenuation at attended cells: mean over eval traces and steps
    // of h_{t+1}(cells of glimpse t) - h_t(cells of glimpse t).
    double atten = 0.0;
    std::int64_t atten_n = 0;
    const std::int64_t grid_cols = cfg.image_size / 16;
    for (const auto& trace : ev.traces) {
        for (std::size_t t = 0; t + 1 < trace.anchors.size(); ++t) {
            const auto& a = trace.anchors[t];
            const std::int64_t top = clamp_footprint_origin(a.cell_row, cfg.image_size) / 16;
            const std::int64_t left = clamp_footprint_origin(a.cell_col, cfg.image_size) / 16;
            double before = 0.0, after = 0.0;
            for (std::int64_t dr = 0; dr < 2; ++dr) {
                for (std::int64_t dc = 0; dc < 2; ++dc) {
                    const auto idx = static_cast<std::size_t>((top + dr) * grid_cols + left + dc);
                    before += trace.heatmaps[t][idx];
                    after += trace.heatmaps[t + 1][idx];
                }
            }
            atten += (after - before) / 4.0;
            ++atten_n;
        }
    }
    atten = atten_n > 0 ? atten / static_cast<double>(atten_n) : 0.0;

    std::ofstream report(run_dir + "/report.md");
    report << "# Run analysis\n\n";
    report << "- config hash: " << run_hash << "\n";
    report << "- eval metric (" << (cfg.task == "recon" ? "RMSE_255" : cfg.task == "seg" ? "mPA" : "accuracy")
           << "): " << ev.metric << " over " << ev.traces.size() << " scenes\n";
    report << "- average glimpse map: [average_glimpse_map.pgm](average_glimpse_map.pgm)\n";
    report << "- init-agreement Jaccard (model): " << agreement << " over " << n << " scenes x " << n_runs
           << " runs\n";
    report << "- init-agreement Jaccard (random-policy Monte-Carlo baseline): " << baseline << "\n";
    report << "- mean heatmap change at attended cells (negative = attenuation): " << atten << "\n";
    if (fs::exists(run_dir + "/ablation.csv")) {
        report << "- ablation table: [ablation.csv](ablation.csv)\n";
    }
    if (fs::exists(run_dir + "/sweep.csv")) {
        report << "- glimpse sweep: [sweep.csv](sweep.csv)\n";
    }
    std::printf("agreement=%.4f baseline=%.4f attenuation=%.6f -> %s/report.md\n", agreement, baseline, atten,
                run_dir.c_str());
    return 0;
}

int cmd_render(const std::string& run_dir, std::int64_t scene_seed) {
    RunConfig cfg = config_of_run(run_dir);
    GaeModel model = load_model(run_dir, cfg, "");
    const Scene scene = generate(static_cast<std::uint64_t>(scene_seed), DatagenParams{cfg.image_size});
    EpisodeOptions opts;
    opts.record_snapshots = true;
    auto trace = run_episode(scene, model, cfg, EpisodeMode::Eval,
                             derive_seed(cfg.seed, "render", static_cast<std::uint64_t>(scene_seed)), opts);

    const std::string dir = run_dir + "/render_" + std::to_string(scene_seed);
    const auto files = render_step_panel(trace, scene, cfg.task_enum(), dir);
    write_ppm(dir + "/scene.ppm", scene.image, scene.height, scene.width);
    std::printf("wrote %zu step images to %s\n", files.size(), dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Glimpse-driven active visual exploration engine"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::int64_t export_scenes = 0;
    bool resume = false;
    std::string run_dir, checkpoint, t_list = "2,4,6,8";
    std::int64_t workers = 0, scene_seed = 0, analyze_scenes = 50;
    int agreement_runs = 4;

    auto* gen = app.add_subcommand("gen-data", "write train/eval scene manifests");
    add_common(gen, flags);
    gen->add_option("--export", export_scenes, "also export the first N eval scenes as PPM");

    std::string train_run_dir;
    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, flags);
    train->add_flag("--resume", resume, "continue from the run's last epoch boundary");
    train->add_option("--run", train_run_dir, "explicit run directory (default: <out>/train-<config hash>)");

    auto* eval = app.add_subcommand("eval", "evaluate a trained run on its eval split");
    eval->add_option("--run", run_dir, "training run directory")->required();
    eval->add_option("--checkpoint", checkpoint, "checkpoint path (default: run's best)");
    eval->add_option("--workers", workers, "parallel eval workers");

    auto* ablate = app.add_subcommand("ablate", "train and evaluate the five module-ablation variants");
    add_common(ablate, flags);

    auto* sweep = app.add_subcommand("sweep", "glimpse-count sweep for attention and random policies");
    add_common(sweep, flags);
    sweep->add_option("--t-values", t_list, "comma-separated glimpse counts");

    auto* analyze = app.add_subcommand("analyze", "glimpse map, init agreement, heatmap attenuation");
    analyze->add_option("--run", run_dir, "training run directory")->required();
    analyze->add_option("--scenes", analyze_scenes, "eval scenes for the agreement score");
    analyze->add_option("--runs", agreement_runs, "episodes per scene for the agreement score");

    auto* render = app.add_subcommand("render", "step-by-step reconstruction/heatmap/mask panel");
    render->add_option("--run", run_dir, "training run directory")->required();
    render->add_option("--scene-seed", scene_seed, "scene seed to render")->required();

    app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ConfigError::exit_code;
    }

    try {
        if (app.got_subcommand("gradcheck")) {
            return cmd_gradcheck();
        }
        if (app.got_subcommand(gen)) {
            return cmd_gen_data(flags, export_scenes);
        }
        if (app.got_subcommand(train)) {
            return cmd_train(flags, resume, train_run_dir);
        }
        if (app.got_subcommand(eval)) {
            return cmd_eval(run_dir, checkpoint, workers);
        }
        if (app.got_subcommand(ablate)) {
            return cmd_ablate(flags);
        }
        if (app.got_subcommand(sweep)) {
            return cmd_sweep(flags, t_list);
        }
        if (app.got_subcommand(analyze)) {
            return cmd_analyze(run_dir, analyze_scenes, agreement_runs);
        }
        if (app.got_subcommand(render)) {
            return cmd_render(run_dir, scene_seed);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return ConfigError::exit_code;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return DataError::exit_code;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return NumericError::exit_code;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return IoError::exit_code;
    }
    return 0;
}
