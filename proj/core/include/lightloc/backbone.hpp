#pragma once

#include <cstdint>

#include "lightloc/geometry.hpp"
#include "lightloc/mlp.hpp"

namespace lightloc {

struct BackboneConfig {
    int point_features = 48;    // random Fourier bank over the point itself
    int context_features = 48;  // bank mean-pooled over the whole cloud
    int joint_features = 64;    // bank over the joint (point, context) space
    double point_length_scale = 8.0;
    double context_length_scale = 15.0;
    double joint_context_gain = 8.0;  // context sensitivity of the joint bank
    std::uint64_t seed = 0;
};

// Scene-agnostic feature extractor stand-in: a fixed, seeded random-feature
// encoder over sensor-frame geometry. Per-point rows concatenate a projected
// point encoding, the raw coordinates, a permutation-invariant frame context,
// and a joint bank that couples the point to the context (the head reads
// position-conditioned point encodings linearly from it). Identical sensor
// clouds always produce identical features; nothing here is ever trained.
class FrozenBackbone {
public:
    explicit FrozenBackbone(const BackboneConfig& config);

    // Dense per-point features, one row per point (sensor frame required).
    Matrix dense_features(const PointCloud& sensor_cloud) const;

    // Elementwise max over the dense feature rows.
    Vector global_feature(const Matrix& dense) const;
    Vector global_feature(const PointCloud& sensor_cloud) const;

    // point block + xyz + context block + joint block
    int feature_dim() const {
        return config_.point_features + 3 + config_.context_features + config_.joint_features;
    }
    const BackboneConfig& config() const { return config_; }

private:
    BackboneConfig config_;
    Matrix point_dirs_;    // point_features x 3
    Vector point_phase_;   // point_features
    Matrix context_dirs_;  // context_features x 3
    Vector context_phase_;
    Matrix projection_;    // point_features x point_features
    Matrix joint_point_dirs_;    // joint_features x 3
    Matrix joint_context_dirs_;  // joint_features x context_features
    Vector joint_phase_;
};

}  // namespace lightloc
