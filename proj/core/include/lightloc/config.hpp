#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "lightloc/backbone.hpp"
#include "lightloc/classifier.hpp"
#include "lightloc/fusion.hpp"
#include "lightloc/pose_solver.hpp"
#include "lightloc/scene.hpp"
#include "lightloc/trainer.hpp"

namespace lightloc {

// Plain-text configuration: one `section.key = value` per line, '#' comments.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text);
std::string render_kv(const KvMap& kv);
KvMap load_kv_file(const std::string& path);

struct ScgSettings {
    bool enabled = true;
    int k1 = 4;   // synthetic-scene default; large scenes use 25/100
    int k2 = 4;
    int cluster_dims = 3;  // 2 clusters in the ground plane
    double epsilon = 0.1;
    double sigma = 0.1;
    int hidden = 64;
    int epochs = 50;
    int batch_size = 32;  // desk-scale scenes; large scenes use 512
    double lr_min = 1e-3;
    double lr_max = 1e-2;
    double weight_decay = 0.0;
    std::string optimizer = "adam";
};

struct RsdSettings {
    // Strategy the trainer applies at the shared prune schedule: rsd, none,
    // random, or uniform (the latter two are the comparison baselines).
    std::string strategy = "rsd";
    double downsample_ratio = 0.25;
    double start_ratio = 0.25;
    double stop_ratio = 0.85;
    int window = 3;
};

struct TrainerSettings {
    int epochs = 25;
    int batch_frames = 16;
    int points_per_frame = 128;
    int hidden_width = 128;
    int hidden_layers = 3;
    double lr_min = 5e-4;
    double lr_max = 5e-3;
    std::string optimizer = "adam";
    double weight_decay = 1e-2;
    bool augment = false;
};

struct FusionSettings {
    int laps = 6;
    double bias_x = 0.04;
    double bias_y = 0.03;
    double bias_z = 0.0;
    double noise_sigma = 0.02;
    double process_sigma = 0.1;
    double noise_scale = 1.0;  // scale on V_t = I * (1 - c)
    double confidence_floor = 0.0;
    int observation_stride = 1;
    double initial_p = 1e-2;
};

// Full pipeline configuration. Every field maps to one dotted config key and
// every CLI flag overrides its key.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    SceneSpec scene;
    BackboneConfig backbone;
    ScgSettings scg;
    RsdSettings rsd;
    TrainerSettings trainer;
    RansacParams ransac;
    FusionSettings fusion;

    static RunConfig from_kv(const KvMap& kv);
    KvMap to_kv() const;
    std::string render() const { return render_kv(to_kv()); }

    // FNV-1a hash of the canonical rendering, as 16 hex digits.
    std::string hash() const;

    // Derived module configs with seeds split from the root seed.
    ClassifierConfig classifier_config(int input_dim) const;
    TrainConfig train_config() const;
    RsdConfig rsd_config() const;
    RansacParams ransac_params() const;
    BackboneConfig backbone_config() const;
    SceneSpec scene_spec() const;

    bool operator==(const RunConfig& other) const { return to_kv() == other.to_kv(); }
};

Optimizer::Kind parse_optimizer(const std::string& name);
PruneStrategy parse_strategy(const std::string& name);

}  // namespace lightloc
