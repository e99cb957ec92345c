#include "gae/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gae/error.hpp"
#include "gae/rng.hpp"

namespace gae {

namespace {

struct Color {
    double r, g, b;
};

Color lerp(const Color& a, const Color& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Sky gradients per palette: {top, at-horizon}.
const Color kSkyTop[2] = {{0.25, 0.45, 0.85}, {0.45, 0.20, 0.45}};
const Color kSkyHorizon[2] = {{0.70, 0.82, 0.95}, {0.95, 0.60, 0.35}};
const Color kGroundBase[2] = {{0.35, 0.42, 0.22}, {0.40, 0.30, 0.20}};

} // namespace

bool ObjectSpec::covers(double row, double col) const {
    const double dr = row - center_row;
    const double dc = col - center_col;
    switch (shape) {
        case ShapeKind::Disc:
            return dr * dr + dc * dc <= size * size;
        case ShapeKind::Rectangle:
            return std::abs(dr) <= size * 0.8 && std::abs(dc) <= size;
        case ShapeKind::Triangle: {
            // Upright isoceles: apex at (center_row - size), base at (center_row + size).
            if (dr < -size || dr > size) {
                return false;
            }
            const double half_width = size * (dr + size) / (2.0 * size);
            return std::abs(dc) <= half_width;
        }
    }
    return false;
}

SceneRecipe make_recipe(std::uint64_t seed, const DatagenParams& params) {
    Rng rng(derive_seed(seed, "scene"));
    const double s = static_cast<double>(params.image_size);

    SceneRecipe r;
    // Narrow horizon band (within the [0.2,0.8] contract): scene structure
    // concentrates in predictable rows, the dataset bias the policy can learn.
    r.horizon_frac = rng.uniform(0.35, 0.65);
    r.sky_palette = static_cast<int>(rng.uniform_int(2));
    r.ground_texture = static_cast<int>(rng.uniform_int(2));
    r.scene_class = r.sky_palette * 2 + (r.horizon_frac < 0.5 ? 0 : 1);

    const double horizon_row = r.horizon_frac * s;
    const std::int64_t n_objects = 2 + static_cast<std::int64_t>(rng.uniform_int(4));
    for (std::int64_t i = 0; i < n_objects; ++i) {
        ObjectSpec obj;
        const auto pick = rng.uniform_int(3);
        obj.shape = pick == 0 ? ShapeKind::Disc : (pick == 1 ? ShapeKind::Rectangle : ShapeKind::Triangle);
        obj.size = rng.uniform(8.0, 20.0);
        // Salient structure concentrates in the horizon band.
        const double row_lo = std::max(obj.size + 1.0, horizon_row - 12.0);
        const double row_hi = std::min(s - obj.size - 1.0, horizon_row + 24.0);
        obj.center_row = row_hi > row_lo ? rng.uniform(row_lo, row_hi) : s / 2.0;
        obj.center_col = rng.uniform(obj.size + 1.0, s - obj.size - 1.0);
        obj.color[0] = rng.uniform(0.1, 1.0);
        obj.color[1] = rng.uniform(0.1, 1.0);
        obj.color[2] = rng.uniform(0.1, 1.0);
        r.objects.push_back(obj);
    }
    return r;
}

Scene generate(std::uint64_t seed, const DatagenParams& params) {
    return render_scene(make_recipe(seed, params), seed, params);
}

Scene render_scene(const SceneRecipe& recipe, std::uint64_t seed, const DatagenParams& params) {
    const std::int64_t s = params.image_size;
    const std::int64_t px = s * s;

    Scene scene;
    scene.height = s;
    scene.width = s;
    scene.seed = seed;
    scene.class_label = recipe.scene_class;
    scene.image.assign(static_cast<std::size_t>(3 * px), 0.0);
    scene.seg_labels.assign(static_cast<std::size_t>(px), kSegSky);

    const std::int64_t horizon_row = static_cast<std::int64_t>(recipe.horizon_frac * static_cast<double>(s));
    const Color top = kSkyTop[recipe.sky_palette];
    const Color hor = kSkyHorizon[recipe.sky_palette];
    const Color ground = kGroundBase[recipe.sky_palette];

    for (std::int64_t r = 0; r < s; ++r) {
        for (std::int64_t c = 0; c < s; ++c) {
            Color col;
            std::int64_t label;
            if (r < horizon_row) {
                const double t = static_cast<double>(r) / std::max<std::int64_t>(1, horizon_row - 1);
                col = lerp(top, hor, t);
                label = kSegSky;
            } else {
                // High-frequency deterministic texture below the horizon.
                double shade;
                if (recipe.ground_texture == 0) {
                    shade = ((r / 4) % 2 == 0) ? 1.0 : 0.55;
                } else {
                    shade = (((r / 6) + (c / 6)) % 2 == 0) ? 1.0 : 0.5;
                }
                const double depth = 1.0 - 0.3 * static_cast<double>(r - horizon_row) / static_cast<double>(s);
                col = {ground.r * shade * depth, ground.g * shade * depth, ground.b * shade * depth};
                label = kSegGround;
            }
            scene.image[static_cast<std::size_t>(0 * px + r * s + c)] = col.r;
            scene.image[static_cast<std::size_t>(1 * px + r * s + c)] = col.g;
            scene.image[static_cast<std::size_t>(2 * px + r * s + c)] = col.b;
            scene.seg_labels[static_cast<std::size_t>(r * s + c)] = label;
        }
    }

    // Painter's order: later objects overdraw earlier ones; labels follow paint.
    for (const auto& obj : recipe.objects) {
        const std::int64_t label = obj.shape == ShapeKind::Disc
                                       ? kSegDisc
                                       : (obj.shape == ShapeKind::Rectangle ? kSegRect : kSegTriangle);
        const std::int64_t r_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(obj.center_row - obj.size) - 1);
        const std::int64_t r_hi = std::min<std::int64_t>(s - 1, static_cast<std::int64_t>(obj.center_row + obj.size) + 1);
        const std::int64_t c_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(obj.center_col - obj.size) - 1);
        const std::int64_t c_hi = std::min<std::int64_t>(s - 1, static_cast<std::int64_t>(obj.center_col + obj.size) + 1);
        for (std::int64_t r = r_lo; r <= r_hi; ++r) {
            for (std::int64_t c = c_lo; c <= c_hi; ++c) {
                if (!obj.covers(static_cast<double>(r), static_cast<double>(c))) {
                    continue;
                }
                scene.image[static_cast<std::size_t>(0 * px + r * s + c)] = obj.color[0];
                scene.image[static_cast<std::size_t>(1 * px + r * s + c)] = obj.color[1];
                scene.image[static_cast<std::size_t>(2 * px + r * s + c)] = obj.color[2];
                scene.seg_labels[static_cast<std::size_t>(r * s + c)] = label;
            }
        }
    }
    return scene;
}

SplitManifests make_splits(std::int64_t n_train, std::int64_t n_eval, std::uint64_t base_seed,
                           const DatagenParams& params) {
    if (n_train < 1 || n_eval < 1) {
        throw ConfigError("make_splits requires n_train >= 1 and n_eval >= 1");
    }
    SplitManifests m;
    m.params = params;
    const std::uint64_t train_base = derive_seed(base_seed, "split-train");
    m.train_seeds.reserve(static_cast<std::size_t>(n_train));
    for (std::int64_t i = 0; i < n_train; ++i) {
        m.train_seeds.push_back(train_base + static_cast<std::uint64_t>(i));
    }
    // Eval range placed directly after the train range: disjoint by construction.
    const std::uint64_t eval_base = train_base + static_cast<std::uint64_t>(n_train);
    m.eval_seeds.reserve(static_cast<std::size_t>(n_eval));
    for (std::int64_t i = 0; i < n_eval; ++i) {
        m.eval_seeds.push_back(eval_base + static_cast<std::uint64_t>(i));
    }
    return m;
}

void write_manifest(const std::string& path, const std::vector<std::uint64_t>& seeds, const DatagenParams& params) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("write_manifest: cannot open " + path);
    }
    os << "# image_size=" << params.image_size << "\n";
    for (const auto seed : seeds) {
        const auto recipe = make_recipe(seed, params);
        os << seed << ",horizon=" << recipe.horizon_frac << ",palette=" << recipe.sky_palette
           << ",texture=" << recipe.ground_texture << ",objects=" << recipe.objects.size()
           << ",class=" << recipe.scene_class << "\n";
    }
}

std::vector<std::uint64_t> read_manifest(const std::string& path, DatagenParams& params_out) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("read_manifest: cannot open " + path);
    }
    std::vector<std::uint64_t> seeds;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto pos = line.find("image_size=");
            if (pos != std::string::npos) {
                params_out.image_size = std::stoll(line.substr(pos + 11));
            }
            continue;
        }
        const auto comma = line.find(',');
        try {
            seeds.push_back(std::stoull(line.substr(0, comma)));
        } catch (const std::exception&) {
            throw DataError("read_manifest: malformed seed line '" + line + "'");
        }
    }
    if (seeds.empty()) {
        throw DataError("read_manifest: no seeds in " + path);
    }
    return seeds;
}

} // namespace gae
