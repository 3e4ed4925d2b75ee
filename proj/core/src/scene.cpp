#include "lightloc/scene.hpp"

#include <algorithm>
#include <cmath>

#include "lightloc/rng.hpp"

namespace lightloc {

Pose loop_pose(const SceneSpec& spec, double u) {
    const double radius = spec.loop_length / (2.0 * M_PI);
    const double theta = 2.0 * M_PI * u;
    Pose pose = yaw_pose(theta + M_PI / 2.0);  // heading along the tangent
    pose.translation = Vec3(radius * std::cos(theta), radius * std::sin(theta), 0.0);
    return pose;
}

namespace {

// Deterministic cap to spec.frame_points: keep the nearest points by range.
// Membership then only churns at the range boundary as the pose moves, and
// duplicated neighborhoods decimate identically because the rule depends
// only on the sensor-frame point set.
void decimate(PointCloud& cloud, int target) {
    if (static_cast<int>(cloud.size()) <= target) return;
    std::sort(cloud.points.begin(), cloud.points.end(), [](const Vec3& a, const Vec3& b) {
        const double ra = a.squaredNorm();
        const double rb = b.squaredNorm();
        if (ra != rb) return ra < rb;
        if (a.x() != b.x()) return a.x() < b.x();
        if (a.y() != b.y()) return a.y() < b.y();
        return a.z() < b.z();
    });
    cloud.points.resize(static_cast<std::size_t>(target));
}

TrainingSample make_frame(const SceneSpec& spec, std::uint64_t id, const Pose& gt,
                          const std::vector<Vec3>& landmarks) {
    TrainingSample frame;
    frame.id = id;
    frame.gt_pose = gt;
    frame.sensor.frame = Frame::Sensor;
    const Pose world_to_sensor = invert(gt);
    for (const Vec3& w : landmarks) {
        if ((w - gt.translation).norm() <= spec.sensing_range) {
            frame.sensor.points.push_back(world_to_sensor.rotation * w +
                                          world_to_sensor.translation);
        }
    }
    if (frame.sensor.size() < 16) {
        throw Error(ErrorCode::InvalidSpec,
                    "frame " + std::to_string(id) + " sees only " +
                        std::to_string(frame.sensor.size()) +
                        " landmarks; increase landmark_count or sensing_range");
    }
    decimate(frame.sensor, spec.frame_points);
    frame.world = transform(gt, frame.sensor);
    return frame;
}

// Half-turn about the loop center. Coordinate negation is exact, so with zero
// jitter a duplicated neighborhood reproduces the source geometry bit-for-bit
// in the world frame.
Vec3 half_turn(const Vec3& p) { return Vec3(-p.x(), -p.y(), p.z()); }

struct AliasRegions {
    // Loop-parameter spans [start, end) of the source regions; the duplicate
    // of span i sits at start + 0.5.
    std::vector<std::pair<double, double>> spans;
};

// Replaces the landmark neighborhoods opposite each source region with
// half-turned copies of the source landmarks, leaving pose pairs
// (u, u + 0.5) looking at identical sensor-frame geometry (up to the
// optional jitter).
AliasRegions duplicate_neighborhoods(const SceneSpec& spec, std::vector<Vec3>& landmarks,
                                     Rng& jitter_rng) {
    AliasRegions regions;
    if (spec.aliasing_factor <= 0) return regions;
    if (spec.train_frames % 2 != 0 || (spec.test_frames > 0 && spec.test_frames % 2 != 0)) {
        throw Error(ErrorCode::InvalidSpec, "aliasing requires even frame counts");
    }
    const double span_u =
        static_cast<double>(spec.alias_region_frames) / static_cast<double>(spec.train_frames);
    const double stride_u = 0.5 / static_cast<double>(spec.aliasing_factor);
    if (span_u >= stride_u || spec.alias_region_frames < 1) {
        throw Error(ErrorCode::InvalidSpec, "aliasing regions do not fit the trajectory");
    }
    const double radius = spec.loop_length / (2.0 * M_PI);
    if (2.0 * radius <= spec.alias_min_separation) {
        throw Error(ErrorCode::InvalidSpec, "loop too small for the requested alias separation");
    }
    // Source zones occupy one block of the loop, copies the opposite block.
    // The gap between the blocks must exceed two sensing ranges or a source
    // frame could see duplicated landmarks and break the pairwise identity.
    const double block_gap_u = stride_u - span_u;
    const double gap_chord = 2.0 * radius * std::sin(M_PI * block_gap_u);
    if (gap_chord <= 2.0 * spec.sensing_range) {
        throw Error(ErrorCode::InvalidSpec,
                    "aliased zones too close: gap chord " + std::to_string(gap_chord) +
                        " m needs to exceed " + std::to_string(2.0 * spec.sensing_range) +
                        " m; use a longer loop, a shorter sensing range, or fewer regions");
    }

    // Sample the source and duplicate spans densely with poses so the
    // containment tests below cover every frame the spans can produce.
    auto span_positions = [&](double u0, double u1, double offset) {
        std::vector<Vec3> centers;
        const int steps = std::max(8, spec.alias_region_frames * 4);
        for (int i = 0; i <= steps; ++i) {
            const double u = u0 + (u1 - u0) * static_cast<double>(i) / static_cast<double>(steps);
            centers.push_back(loop_pose(spec, u + offset).translation);
        }
        return centers;
    };
    auto near_any = [&](const Vec3& p, const std::vector<Vec3>& centers) {
        for (const Vec3& c : centers) {
            if ((p - c).norm() <= spec.sensing_range) return true;
        }
        return false;
    };

    std::vector<std::vector<Vec3>> source_centers, copy_centers;
    for (int r = 0; r < spec.aliasing_factor; ++r) {
        const double u0 = static_cast<double>(r) * stride_u;
        const double u1 = u0 + span_u;
        regions.spans.emplace_back(u0, u1);
        source_centers.push_back(span_positions(u0, u1, 0.0));
        copy_centers.push_back(span_positions(u0, u1, 0.5));
    }

    // One pass per landmark: drop anything a copy-zone frame could see, add
    // exactly one half-turned duplicate of anything a source-zone frame sees.
    std::vector<Vec3> kept;
    std::vector<Vec3> additions;
    kept.reserve(landmarks.size());
    for (const Vec3& l : landmarks) {
        bool in_copy_zone = false;
        bool in_source_zone = false;
        for (int r = 0; r < spec.aliasing_factor && !(in_copy_zone && in_source_zone); ++r) {
            in_copy_zone = in_copy_zone || near_any(l, copy_centers[static_cast<std::size_t>(r)]);
            in_source_zone =
                in_source_zone || near_any(l, source_centers[static_cast<std::size_t>(r)]);
        }
        if (!in_copy_zone) kept.push_back(l);
        if (in_source_zone) {
            Vec3 copy = half_turn(l);
            if (spec.alias_jitter > 0.0) {
                copy += Vec3(jitter_rng.normal(0.0, spec.alias_jitter),
                             jitter_rng.normal(0.0, spec.alias_jitter),
                             jitter_rng.normal(0.0, spec.alias_jitter));
            }
            additions.push_back(copy);
        }
    }
    kept.insert(kept.end(), additions.begin(), additions.end());
    landmarks = std::move(kept);
    return regions;
}

// Frame index pairs (source, duplicate) whose loop parameters fall inside the
// duplicated spans. Frame i of a split with n frames sits at u = (i + phase)/n.
std::vector<AliasPair> designated_pairs(const AliasRegions& regions, int n, double phase) {
    std::vector<AliasPair> pairs;
    for (const auto& [u0, u1] : regions.spans) {
        for (int i = 0; i < n; ++i) {
            const double u = (static_cast<double>(i) + phase) / static_cast<double>(n);
            if (u >= u0 && u < u1) {
                pairs.push_back({static_cast<std::size_t>(i),
                                 static_cast<std::size_t>(i + n / 2)});
            }
        }
    }
    return pairs;
}

}  // namespace

SyntheticScene generate_scene(const SceneSpec& spec) {
    if (spec.train_frames < 1 || spec.test_frames < 0) {
        throw Error(ErrorCode::InvalidSpec, "frame counts must be positive");
    }
    if (spec.loop_length <= 0.0 || spec.landmark_count < 16 || spec.sensing_range <= 0.0 ||
        spec.frame_points < 16) {
        throw Error(ErrorCode::InvalidSpec, "degenerate scene dimensions");
    }

    SyntheticScene scene;
    scene.spec = spec;

    const double radius = spec.loop_length / (2.0 * M_PI);
    Rng landmark_rng(derive_seed(spec.seed, "scene.landmarks"));
    scene.landmarks.reserve(static_cast<std::size_t>(spec.landmark_count));
    for (int i = 0; i < spec.landmark_count; ++i) {
        const double phi = landmark_rng.uniform(0.0, 2.0 * M_PI);
        const double rad = radius + landmark_rng.uniform(-spec.corridor_half_width,
                                                         spec.corridor_half_width);
        const double z = landmark_rng.uniform(0.0, spec.landmark_max_height);
        scene.landmarks.emplace_back(rad * std::cos(phi), rad * std::sin(phi), z);
    }

    Rng jitter_rng(derive_seed(spec.seed, "scene.alias_jitter"));
    const AliasRegions regions = duplicate_neighborhoods(spec, scene.landmarks, jitter_rng);
    scene.train_alias_pairs = designated_pairs(regions, spec.train_frames, 0.0);
    if (spec.test_frames > 0) {
        scene.test_alias_pairs = designated_pairs(regions, spec.test_frames, 0.5);
    }

    scene.train.reserve(static_cast<std::size_t>(spec.train_frames));
    for (int i = 0; i < spec.train_frames; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(spec.train_frames);
        scene.train.push_back(
            make_frame(spec, static_cast<std::uint64_t>(i), loop_pose(spec, u), scene.landmarks));
    }
    scene.test.reserve(static_cast<std::size_t>(spec.test_frames));
    for (int j = 0; j < spec.test_frames; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(spec.test_frames);
        scene.test.push_back(
            make_frame(spec, static_cast<std::uint64_t>(j), loop_pose(spec, u), scene.landmarks));
    }
    return scene;
}

}  // namespace lightloc
