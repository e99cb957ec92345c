#include "gae/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gae/error.hpp"

namespace gae {

Task RunConfig::task_enum() const {
    if (task == "recon") {
        return Task::Reconstruction;
    }
    if (task == "seg") {
        return Task::Segmentation;
    }
    if (task == "cls") {
        return Task::Classification;
    }
    throw ConfigError("task must be one of recon|seg|cls, got '" + task + "'");
}

PolicyKind RunConfig::policy_enum() const {
    if (!sa_gating && !contrast_stream) {
        return PolicyKind::NoSAC;
    }
    if (!sa_gating) {
        return PolicyKind::NoSAExtraChannel;
    }
    if (policy == "attn") {
        return PolicyKind::AttentionArgmax;
    }
    if (policy == "random") {
        return PolicyKind::Random;
    }
    throw ConfigError("policy must be attn|random, got '" + policy + "'");
}

StepAgg RunConfig::step_agg_enum() const {
    if (step_agg == "mean") {
        return StepAgg::Mean;
    }
    if (step_agg == "sum") {
        return StepAgg::Sum;
    }
    throw ConfigError("step_agg must be mean|sum, got '" + step_agg + "'");
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.task = task_enum();
    m.image_size = image_size;
    m.enc = EncoderConfig{c1, c2, c3};
    m.contrast_stream = contrast_stream;
    m.sa_gating = sa_gating;
    m.no_decoder = no_decoder;
    return m;
}

namespace {

std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "off") {
        return false;
    }
    throw ConfigError("config field '" + key + "' expects a boolean, got '" + value + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "task") {
        task = value;
    } else if (key == "glimpses") {
        glimpses = parse_int(key, value);
    } else if (key == "image_size") {
        image_size = parse_int(key, value);
    } else if (key == "c1") {
        c1 = parse_int(key, value);
    } else if (key == "c2") {
        c2 = parse_int(key, value);
    } else if (key == "c3") {
        c3 = parse_int(key, value);
    } else if (key == "lr") {
        lr = parse_double(key, value);
    } else if (key == "epochs") {
        epochs = parse_int(key, value);
    } else if (key == "batch_size") {
        batch_size = parse_int(key, value);
    } else if (key == "seed") {
        seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "policy") {
        policy = value;
    } else if (key == "contrast") {
        contrast = parse_bool(key, value);
    } else if (key == "contrast_stream") {
        contrast_stream = parse_bool(key, value);
    } else if (key == "sa_gating") {
        sa_gating = parse_bool(key, value);
    } else if (key == "no_decoder") {
        no_decoder = parse_bool(key, value);
    } else if (key == "step_agg") {
        step_agg = value;
    } else if (key == "n_train") {
        n_train = parse_int(key, value);
    } else if (key == "n_eval") {
        n_eval = parse_int(key, value);
    } else if (key == "episodes_per_epoch") {
        episodes_per_epoch = parse_int(key, value);
    } else if (key == "eval_episodes") {
        eval_episodes = parse_int(key, value);
    } else if (key == "patience") {
        patience = parse_int(key, value);
    } else if (key == "workers") {
        workers = parse_int(key, value);
    } else {
        throw ConfigError("unknown config field '" + key + "'");
    }
}

std::string RunConfig::canonical_text() const {
    std::ostringstream os;
    os << "task=" << task << "\n";
    os << "glimpses=" << glimpses << "\n";
    os << "image_size=" << image_size << "\n";
    os << "c1=" << c1 << "\n";
    os << "c2=" << c2 << "\n";
    os << "c3=" << c3 << "\n";
    os << "lr=" << fmt_double(lr) << "\n";
    os << "epochs=" << epochs << "\n";
    os << "batch_size=" << batch_size << "\n";
    os << "seed=" << seed << "\n";
    os << "policy=" << policy << "\n";
    os << "contrast=" << (contrast ? "true" : "false") << "\n";
    os << "contrast_stream=" << (contrast_stream ? "true" : "false") << "\n";
    os << "sa_gating=" << (sa_gating ? "true" : "false") << "\n";
    os << "no_decoder=" << (no_decoder ? "true" : "false") << "\n";
    os << "step_agg=" << step_agg << "\n";
    os << "n_train=" << n_train << "\n";
    os << "n_eval=" << n_eval << "\n";
    os << "episodes_per_epoch=" << episodes_per_epoch << "\n";
    os << "eval_episodes=" << eval_episodes << "\n";
    os << "patience=" << patience << "\n";
    os << "workers=" << workers << "\n";
    return os.str();
}

std::string RunConfig::config_hash() const {
    // FNV-1a over the canonical text.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : canonical_text()) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("config file not found: " + path);
    }
    RunConfig cfg;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        // strip comments and surrounding whitespace
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: '" + line + "'");
        }
        cfg.apply(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

void write_resolved_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot write resolved config to " + path);
    }
    os << cfg.canonical_text();
}

} // namespace gae
