#include "lightloc/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lightloc/rng.hpp"

namespace lightloc {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Typed views over the KvMap with defaulting and error reporting.
struct KvReader {
    const KvMap& kv;

    std::string str(const std::string& key, const std::string& fallback) const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }
    double num(const std::string& key, double fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        char* end = nullptr;
        const double v = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0') {
            throw Error(ErrorCode::InvalidConfig, key + ": not a number: " + it->second);
        }
        return v;
    }
    long integer(const std::string& key, long fallback) const {
        const double v = num(key, static_cast<double>(fallback));
        const long l = static_cast<long>(v);
        if (static_cast<double>(l) != v) {
            throw Error(ErrorCode::InvalidConfig, key + ": expected an integer");
        }
        return l;
    }
    bool boolean(const std::string& key, bool fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw Error(ErrorCode::InvalidConfig, key + ": expected true/false");
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        char* end = nullptr;
        const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
        if (end == it->second.c_str() || *end != '\0') {
            throw Error(ErrorCode::InvalidConfig, key + ": not an unsigned integer");
        }
        return static_cast<std::uint64_t>(v);
    }
};

const char* const kKnownKeys[] = {
    "seed", "out",
    "scene.loop_length", "scene.train_frames", "scene.test_frames", "scene.landmark_count",
    "scene.corridor_half_width", "scene.landmark_max_height", "scene.sensing_range",
    "scene.frame_points", "scene.aliasing_factor", "scene.alias_region_frames",
    "scene.alias_min_separation", "scene.alias_jitter",
    "backbone.point_features", "backbone.context_features", "backbone.joint_features",
    "backbone.point_length_scale", "backbone.context_length_scale",
    "backbone.joint_context_gain",
    "scg.enabled", "scg.k1", "scg.k2", "scg.cluster_dims", "scg.epsilon", "scg.sigma",
    "scg.hidden", "scg.epochs", "scg.batch_size", "scg.lr_min", "scg.lr_max",
    "scg.weight_decay", "scg.optimizer",
    "rsd.strategy", "rsd.downsample_ratio", "rsd.start_ratio", "rsd.stop_ratio", "rsd.window",
    "trainer.epochs", "trainer.batch_frames", "trainer.points_per_frame", "trainer.hidden_width",
    "trainer.hidden_layers",
    "trainer.lr_min", "trainer.lr_max", "trainer.optimizer", "trainer.weight_decay",
    "trainer.augment",
    "ransac.max_iterations", "ransac.inlier_threshold", "ransac.min_inlier_fraction",
    "ransac.refit_on_inliers",
    "fusion.laps", "fusion.bias_x", "fusion.bias_y", "fusion.bias_z", "fusion.noise_sigma",
    "fusion.process_sigma", "fusion.noise_scale", "fusion.confidence_floor",
    "fusion.observation_stride", "fusion.initial_p",
};

void check_known(const KvMap& kv) {
    for (const auto& [key, value] : kv) {
        bool known = false;
        for (const char* k : kKnownKeys) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) throw Error(ErrorCode::InvalidConfig, "unknown config key: " + key);
    }
}

}  // namespace

KvMap parse_kv(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidConfig,
                        "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

std::string render_kv(const KvMap& kv) {
    std::string out;
    for (const auto& [key, value] : kv) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

KvMap load_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_kv(text);
}

Optimizer::Kind parse_optimizer(const std::string& name) {
    if (name == "gd") return Optimizer::Kind::Gd;
    if (name == "adam") return Optimizer::Kind::Adam;
    throw Error(ErrorCode::InvalidConfig, "optimizer must be gd or adam, got " + name);
}

PruneStrategy parse_strategy(const std::string& name) {
    if (name == "none") return PruneStrategy::None;
    if (name == "rsd") return PruneStrategy::Rsd;
    if (name == "random") return PruneStrategy::Random;
    if (name == "uniform") return PruneStrategy::Uniform;
    throw Error(ErrorCode::InvalidConfig,
                "rsd.strategy must be rsd, none, random, or uniform, got " + name);
}

RunConfig RunConfig::from_kv(const KvMap& kv) {
    check_known(kv);
    KvReader r{kv};
    RunConfig c;
    c.seed = r.u64("seed", c.seed);
    c.out_dir = r.str("out", c.out_dir);

    c.scene.loop_length = r.num("scene.loop_length", c.scene.loop_length);
    c.scene.train_frames = static_cast<int>(r.integer("scene.train_frames", c.scene.train_frames));
    c.scene.test_frames = static_cast<int>(r.integer("scene.test_frames", c.scene.test_frames));
    c.scene.landmark_count =
        static_cast<int>(r.integer("scene.landmark_count", c.scene.landmark_count));
    c.scene.corridor_half_width = r.num("scene.corridor_half_width", c.scene.corridor_half_width);
    c.scene.landmark_max_height = r.num("scene.landmark_max_height", c.scene.landmark_max_height);
    c.scene.sensing_range = r.num("scene.sensing_range", c.scene.sensing_range);
    c.scene.frame_points = static_cast<int>(r.integer("scene.frame_points", c.scene.frame_points));
    c.scene.aliasing_factor =
        static_cast<int>(r.integer("scene.aliasing_factor", c.scene.aliasing_factor));
    c.scene.alias_region_frames =
        static_cast<int>(r.integer("scene.alias_region_frames", c.scene.alias_region_frames));
    c.scene.alias_min_separation =
        r.num("scene.alias_min_separation", c.scene.alias_min_separation);
    c.scene.alias_jitter = r.num("scene.alias_jitter", c.scene.alias_jitter);

    c.backbone.point_features =
        static_cast<int>(r.integer("backbone.point_features", c.backbone.point_features));
    c.backbone.context_features =
        static_cast<int>(r.integer("backbone.context_features", c.backbone.context_features));
    c.backbone.joint_features =
        static_cast<int>(r.integer("backbone.joint_features", c.backbone.joint_features));
    c.backbone.joint_context_gain =
        r.num("backbone.joint_context_gain", c.backbone.joint_context_gain);
    c.backbone.point_length_scale =
        r.num("backbone.point_length_scale", c.backbone.point_length_scale);
    c.backbone.context_length_scale =
        r.num("backbone.context_length_scale", c.backbone.context_length_scale);

    c.scg.enabled = r.boolean("scg.enabled", c.scg.enabled);
    c.scg.k1 = static_cast<int>(r.integer("scg.k1", c.scg.k1));
    c.scg.k2 = static_cast<int>(r.integer("scg.k2", c.scg.k2));
    c.scg.cluster_dims = static_cast<int>(r.integer("scg.cluster_dims", c.scg.cluster_dims));
    c.scg.epsilon = r.num("scg.epsilon", c.scg.epsilon);
    c.scg.sigma = r.num("scg.sigma", c.scg.sigma);
    c.scg.hidden = static_cast<int>(r.integer("scg.hidden", c.scg.hidden));
    c.scg.epochs = static_cast<int>(r.integer("scg.epochs", c.scg.epochs));
    c.scg.batch_size = static_cast<int>(r.integer("scg.batch_size", c.scg.batch_size));
    c.scg.lr_min = r.num("scg.lr_min", c.scg.lr_min);
    c.scg.lr_max = r.num("scg.lr_max", c.scg.lr_max);
    c.scg.weight_decay = r.num("scg.weight_decay", c.scg.weight_decay);
    c.scg.optimizer = r.str("scg.optimizer", c.scg.optimizer);
    parse_optimizer(c.scg.optimizer);

    c.rsd.strategy = r.str("rsd.strategy", c.rsd.strategy);
    parse_strategy(c.rsd.strategy);
    c.rsd.downsample_ratio = r.num("rsd.downsample_ratio", c.rsd.downsample_ratio);
    c.rsd.start_ratio = r.num("rsd.start_ratio", c.rsd.start_ratio);
    c.rsd.stop_ratio = r.num("rsd.stop_ratio", c.rsd.stop_ratio);
    c.rsd.window = static_cast<int>(r.integer("rsd.window", c.rsd.window));

    c.trainer.epochs = static_cast<int>(r.integer("trainer.epochs", c.trainer.epochs));
    c.trainer.batch_frames =
        static_cast<int>(r.integer("trainer.batch_frames", c.trainer.batch_frames));
    c.trainer.points_per_frame =
        static_cast<int>(r.integer("trainer.points_per_frame", c.trainer.points_per_frame));
    c.trainer.hidden_width =
        static_cast<int>(r.integer("trainer.hidden_width", c.trainer.hidden_width));
    c.trainer.hidden_layers =
        static_cast<int>(r.integer("trainer.hidden_layers", c.trainer.hidden_layers));
    c.trainer.lr_min = r.num("trainer.lr_min", c.trainer.lr_min);
    c.trainer.lr_max = r.num("trainer.lr_max", c.trainer.lr_max);
    c.trainer.optimizer = r.str("trainer.optimizer", c.trainer.optimizer);
    parse_optimizer(c.trainer.optimizer);
    c.trainer.weight_decay = r.num("trainer.weight_decay", c.trainer.weight_decay);
    c.trainer.augment = r.boolean("trainer.augment", c.trainer.augment);

    c.ransac.max_iterations =
        static_cast<int>(r.integer("ransac.max_iterations", c.ransac.max_iterations));
    c.ransac.inlier_threshold = r.num("ransac.inlier_threshold", c.ransac.inlier_threshold);
    c.ransac.min_inlier_fraction =
        r.num("ransac.min_inlier_fraction", c.ransac.min_inlier_fraction);
    c.ransac.refit_on_inliers = r.boolean("ransac.refit_on_inliers", c.ransac.refit_on_inliers);

    c.fusion.laps = static_cast<int>(r.integer("fusion.laps", c.fusion.laps));
    c.fusion.bias_x = r.num("fusion.bias_x", c.fusion.bias_x);
    c.fusion.bias_y = r.num("fusion.bias_y", c.fusion.bias_y);
    c.fusion.bias_z = r.num("fusion.bias_z", c.fusion.bias_z);
    c.fusion.noise_sigma = r.num("fusion.noise_sigma", c.fusion.noise_sigma);
    c.fusion.process_sigma = r.num("fusion.process_sigma", c.fusion.process_sigma);
    c.fusion.noise_scale = r.num("fusion.noise_scale", c.fusion.noise_scale);
    c.fusion.confidence_floor = r.num("fusion.confidence_floor", c.fusion.confidence_floor);
    c.fusion.observation_stride =
        static_cast<int>(r.integer("fusion.observation_stride", c.fusion.observation_stride));
    c.fusion.initial_p = r.num("fusion.initial_p", c.fusion.initial_p);
    return c;
}

KvMap RunConfig::to_kv() const {
    KvMap kv;
    kv["seed"] = std::to_string(seed);
    kv["out"] = out_dir;

    kv["scene.loop_length"] = format_double(scene.loop_length);
    kv["scene.train_frames"] = std::to_string(scene.train_frames);
    kv["scene.test_frames"] = std::to_string(scene.test_frames);
    kv["scene.landmark_count"] = std::to_string(scene.landmark_count);
    kv["scene.corridor_half_width"] = format_double(scene.corridor_half_width);
    kv["scene.landmark_max_height"] = format_double(scene.landmark_max_height);
    kv["scene.sensing_range"] = format_double(scene.sensing_range);
    kv["scene.frame_points"] = std::to_string(scene.frame_points);
    kv["scene.aliasing_factor"] = std::to_string(scene.aliasing_factor);
    kv["scene.alias_region_frames"] = std::to_string(scene.alias_region_frames);
    kv["scene.alias_min_separation"] = format_double(scene.alias_min_separation);
    kv["scene.alias_jitter"] = format_double(scene.alias_jitter);

    kv["backbone.point_features"] = std::to_string(backbone.point_features);
    kv["backbone.context_features"] = std::to_string(backbone.context_features);
    kv["backbone.joint_features"] = std::to_string(backbone.joint_features);
    kv["backbone.joint_context_gain"] = format_double(backbone.joint_context_gain);
    kv["backbone.point_length_scale"] = format_double(backbone.point_length_scale);
    kv["backbone.context_length_scale"] = format_double(backbone.context_length_scale);

    kv["scg.enabled"] = scg.enabled ? "true" : "false";
    kv["scg.k1"] = std::to_string(scg.k1);
    kv["scg.k2"] = std::to_string(scg.k2);
    kv["scg.cluster_dims"] = std::to_string(scg.cluster_dims);
    kv["scg.epsilon"] = format_double(scg.epsilon);
    kv["scg.sigma"] = format_double(scg.sigma);
    kv["scg.hidden"] = std::to_string(scg.hidden);
    kv["scg.epochs"] = std::to_string(scg.epochs);
    kv["scg.batch_size"] = std::to_string(scg.batch_size);
    kv["scg.lr_min"] = format_double(scg.lr_min);
    kv["scg.lr_max"] = format_double(scg.lr_max);
    kv["scg.weight_decay"] = format_double(scg.weight_decay);
    kv["scg.optimizer"] = scg.optimizer;

    kv["rsd.strategy"] = rsd.strategy;
    kv["rsd.downsample_ratio"] = format_double(rsd.downsample_ratio);
    kv["rsd.start_ratio"] = format_double(rsd.start_ratio);
    kv["rsd.stop_ratio"] = format_double(rsd.stop_ratio);
    kv["rsd.window"] = std::to_string(rsd.window);

    kv["trainer.epochs"] = std::to_string(trainer.epochs);
    kv["trainer.batch_frames"] = std::to_string(trainer.batch_frames);
    kv["trainer.points_per_frame"] = std::to_string(trainer.points_per_frame);
    kv["trainer.hidden_width"] = std::to_string(trainer.hidden_width);
    kv["trainer.hidden_layers"] = std::to_string(trainer.hidden_layers);
    kv["trainer.lr_min"] = format_double(trainer.lr_min);
    kv["trainer.lr_max"] = format_double(trainer.lr_max);
    kv["trainer.optimizer"] = trainer.optimizer;
    kv["trainer.weight_decay"] = format_double(trainer.weight_decay);
    kv["trainer.augment"] = trainer.augment ? "true" : "false";

    kv["ransac.max_iterations"] = std::to_string(ransac.max_iterations);
    kv["ransac.inlier_threshold"] = format_double(ransac.inlier_threshold);
    kv["ransac.min_inlier_fraction"] = format_double(ransac.min_inlier_fraction);
    kv["ransac.refit_on_inliers"] = ransac.refit_on_inliers ? "true" : "false";

    kv["fusion.laps"] = std::to_string(fusion.laps);
    kv["fusion.bias_x"] = format_double(fusion.bias_x);
    kv["fusion.bias_y"] = format_double(fusion.bias_y);
    kv["fusion.bias_z"] = format_double(fusion.bias_z);
    kv["fusion.noise_sigma"] = format_double(fusion.noise_sigma);
    kv["fusion.process_sigma"] = format_double(fusion.process_sigma);
    kv["fusion.noise_scale"] = format_double(fusion.noise_scale);
    kv["fusion.confidence_floor"] = format_double(fusion.confidence_floor);
    kv["fusion.observation_stride"] = std::to_string(fusion.observation_stride);
    kv["fusion.initial_p"] = format_double(fusion.initial_p);
    return kv;
}

std::string RunConfig::hash() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(render())));
    return buf;
}

ClassifierConfig RunConfig::classifier_config(int input_dim) const {
    ClassifierConfig c;
    c.input_dim = input_dim;
    c.k1 = scg.k1;
    c.k2 = scg.k2;
    c.level1_hidden = {scg.hidden};
    c.level2_hidden = {scg.hidden};
    c.epsilon = scg.epsilon;
    c.epochs = scg.epochs;
    c.batch_size = scg.batch_size;
    c.lr_min = scg.lr_min;
    c.lr_max = scg.lr_max;
    c.weight_decay = scg.weight_decay;
    c.optimizer = parse_optimizer(scg.optimizer);
    c.seed = derive_seed(seed, "module.classifier");
    return c;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = trainer.epochs;
    t.batch_frames = trainer.batch_frames;
    t.points_per_frame = trainer.points_per_frame;
    t.hidden_width = trainer.hidden_width;
    t.hidden_layers = trainer.hidden_layers;
    t.lr_min = trainer.lr_min;
    t.lr_max = trainer.lr_max;
    t.optimizer = parse_optimizer(trainer.optimizer);
    t.weight_decay = trainer.weight_decay;
    t.augment.enabled = trainer.augment;
    t.scg_enabled = scg.enabled;
    t.scg_sigma = scg.sigma;
    t.strategy = parse_strategy(rsd.strategy);
    t.rsd = rsd_config();
    t.seed = derive_seed(seed, "module.trainer");
    return t;
}

RsdConfig RunConfig::rsd_config() const {
    RsdConfig r;
    r.total_epochs = trainer.epochs;
    r.downsample_ratio = rsd.downsample_ratio;
    r.start_ratio = rsd.start_ratio;
    r.stop_ratio = rsd.stop_ratio;
    r.window = rsd.window;
    return r;
}

RansacParams RunConfig::ransac_params() const {
    RansacParams p = ransac;
    p.seed = derive_seed(seed, "module.ransac");
    return p;
}

BackboneConfig RunConfig::backbone_config() const {
    BackboneConfig b = backbone;
    b.seed = derive_seed(seed, "module.backbone");
    return b;
}

SceneSpec RunConfig::scene_spec() const {
    SceneSpec s = scene;
    s.seed = derive_seed(seed, "module.scene");
    return s;
}

}  // namespace lightloc
