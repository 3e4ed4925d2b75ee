#pragma once

#include <cstdint>
#include <vector>

#include "lightloc/geometry.hpp"

namespace lightloc {

// One frame of training or test data.
struct TrainingSample {
    std::uint64_t id = 0;
    PointCloud sensor;  // Frame::Sensor
    PointCloud world;   // Frame::World, exactly transform(gt_pose, sensor)
    Pose gt_pose;
};

struct SceneSpec {
    double loop_length = 200.0;  // closed-loop circumference, meters
    int train_frames = 400;
    int test_frames = 100;
    int landmark_count = 1400;
    double corridor_half_width = 25.0;  // landmark band around the loop
    double landmark_max_height = 8.0;
    double sensing_range = 30.0;
    int frame_points = 256;
    // Aliasing: pairs of trajectory regions whose frames share identical
    // sensor-frame geometry while sitting at world positions on opposite
    // sides of the loop.
    int aliasing_factor = 0;
    int alias_region_frames = 6;
    double alias_min_separation = 20.0;
    // Optional per-point perturbation of the duplicated clouds; 0 keeps the
    // duplicates exact.
    double alias_jitter = 0.0;
    std::uint64_t seed = 0;
};

struct AliasPair {
    std::size_t source_frame = 0;  // index within the split
    std::size_t copy_frame = 0;
};

struct SyntheticScene {
    SceneSpec spec;
    std::vector<TrainingSample> train;
    std::vector<TrainingSample> test;
    std::vector<AliasPair> train_alias_pairs;
    std::vector<AliasPair> test_alias_pairs;
    std::vector<Vec3> landmarks;
};

// Deterministic given spec.seed. Throws InvalidSpec for impossible requests
// (zero frames, aliasing regions that do not fit, too sparse a landmark
// field).
SyntheticScene generate_scene(const SceneSpec& spec);

// Ground-truth pose at loop parameter u in [0, 1): position on the circle,
// heading along the tangent.
Pose loop_pose(const SceneSpec& spec, double u);

}  // namespace lightloc
