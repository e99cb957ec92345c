#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gae {

constexpr std::int64_t kSegSky = 0;
constexpr std::int64_t kSegGround = 1;
constexpr std::int64_t kSegDisc = 2;
constexpr std::int64_t kSegRect = 3;
constexpr std::int64_t kSegTriangle = 4;
constexpr std::int64_t kSegClasses = 5;
constexpr std::int64_t kSceneClasses = 4;

struct Scene {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<double> image;            // planar [3,H,W], values in [0,1]
    std::vector<std::int64_t> seg_labels; // [H*W]
    std::int64_t class_label = 0;
    std::uint64_t seed = 0;
};

enum class ShapeKind { Disc, Rectangle, Triangle };

struct ObjectSpec {
    ShapeKind shape;
    double center_row, center_col;
    double size;       // radius / half-extent in pixels
    double color[3];
    bool covers(double row, double col) const;
};

struct SceneRecipe {
    double horizon_frac;   // in [0.2, 0.8]
    int sky_palette;       // 0 = day, 1 = dusk
    int ground_texture;    // 0 = stripes, 1 = checker
    std::vector<ObjectSpec> objects;
    int scene_class;       // palette * 2 + (horizon_frac < 0.5 ? 0 : 1)
};

struct DatagenParams {
    std::int64_t image_size = 128;
};

SceneRecipe make_recipe(std::uint64_t seed, const DatagenParams& params);
Scene render_scene(const SceneRecipe& recipe, std::uint64_t seed, const DatagenParams& params);
Scene generate(std::uint64_t seed, const DatagenParams& params);

struct SplitManifests {
    std::vector<std::uint64_t> train_seeds;
    std::vector<std::uint64_t> eval_seeds;
    DatagenParams params;
};

// Disjoint seed ranges derived from base_seed; manifests list seeds, not pixels.
SplitManifests make_splits(std::int64_t n_train, std::int64_t n_eval, std::uint64_t base_seed,
                           const DatagenParams& params);

void write_manifest(const std::string& path, const std::vector<std::uint64_t>& seeds, const DatagenParams& params);
std::vector<std::uint64_t> read_manifest(const std::string& path, DatagenParams& params_out);

} // namespace gae
