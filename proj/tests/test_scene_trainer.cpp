#include <doctest.h>

#include <set>

#include "lightloc/backbone.hpp"
#include "lightloc/scene.hpp"
#include "lightloc/trainer.hpp"
#include "test_support.hpp"

using namespace lightloc;

namespace {

SceneSpec small_scene_spec() {
    SceneSpec spec;
    spec.loop_length = 200.0;
    spec.train_frames = 120;
    spec.test_frames = 30;
    spec.landmark_count = 900;
    spec.sensing_range = 30.0;
    spec.frame_points = 96;
    spec.seed = 9;
    return spec;
}

// Aliased scenes need the duplicated zones separated by more than two
// sensing ranges; a longer loop with a shorter range provides that.
SceneSpec aliased_scene_spec(int factor) {
    SceneSpec spec;
    spec.loop_length = 480.0;
    spec.train_frames = 240;
    spec.test_frames = 60;
    spec.landmark_count = 2600;
    spec.corridor_half_width = 14.0;
    spec.sensing_range = 15.0;
    spec.frame_points = 96;
    spec.aliasing_factor = factor;
    spec.alias_region_frames = 10;
    spec.seed = 9;
    return spec;
}

BackboneConfig small_backbone_config() {
    BackboneConfig cfg;
    cfg.point_features = 32;
    cfg.context_features = 32;
    cfg.joint_features = 32;
    cfg.seed = 4;
    return cfg;
}

}  // namespace

TEST_CASE("generated frames satisfy the world = transform(gt, sensor) contract") {
    const SyntheticScene scene = generate_scene(small_scene_spec());
    REQUIRE(scene.train.size() == 120);
    REQUIRE(scene.test.size() == 30);
    for (const auto& split : {scene.train, scene.test}) {
        for (const TrainingSample& f : split) {
            REQUIRE(f.sensor.size() == f.world.size());
            const PointCloud expected = transform(f.gt_pose, f.sensor);
            for (std::size_t i = 0; i < f.sensor.size(); ++i) {
                CHECK((expected.points[i] - f.world.points[i]).norm() == 0.0);  // bit-exact
            }
        }
    }
}

TEST_CASE("scene generation is deterministic and non-aliased frames are unique") {
    const SyntheticScene a = generate_scene(small_scene_spec());
    const SyntheticScene b = generate_scene(small_scene_spec());
    CHECK(a.train[17].sensor.points == b.train[17].sensor.points);
    CHECK(a.train_alias_pairs.empty());

    // Nearest-neighbor uniqueness of frame geometry: no two frames share
    // their sensor cloud.
    std::set<std::pair<double, double>> signatures;
    for (const TrainingSample& f : a.train) {
        Vec3 sum = Vec3::Zero();
        for (const Vec3& p : f.sensor.points) sum += p;
        signatures.insert({sum.x(), sum.y()});
    }
    CHECK(signatures.size() == a.train.size());
}

TEST_CASE("invalid scene requests are rejected") {
    SceneSpec spec = small_scene_spec();
    spec.train_frames = 0;
    CHECK_THROWS_AS(generate_scene(spec), Error);

    spec = small_scene_spec();
    spec.aliasing_factor = 4;  // 30 m sensing on a 200 m loop leaves no gap
    CHECK_THROWS_AS(generate_scene(spec), Error);
    try {
        generate_scene(spec);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidSpec);
    }
}

TEST_CASE("aliased regions duplicate sensor geometry at distant world poses") {
    const SyntheticScene scene = generate_scene(aliased_scene_spec(4));
    REQUIRE(scene.train_alias_pairs.size() == 4 * 10);
    REQUIRE(!scene.test_alias_pairs.empty());

    for (const AliasPair& pair : scene.train_alias_pairs) {
        const TrainingSample& src = scene.train[pair.source_frame];
        const TrainingSample& dup = scene.train[pair.copy_frame];
        REQUIRE(src.sensor.size() == dup.sensor.size());
        double max_diff = 0.0;
        for (std::size_t i = 0; i < src.sensor.size(); ++i) {
            max_diff = std::max(max_diff, (src.sensor.points[i] - dup.sensor.points[i]).norm());
        }
        CHECK(max_diff < 1e-9);
        CHECK((src.gt_pose.translation - dup.gt_pose.translation).norm() > 20.0);
    }
}

TEST_CASE("alias jitter keeps regions similar but not identical") {
    SceneSpec spec = aliased_scene_spec(2);
    spec.alias_jitter = 0.1;
    const SyntheticScene scene = generate_scene(spec);
    const AliasPair pair = scene.train_alias_pairs.front();
    const TrainingSample& src = scene.train[pair.source_frame];
    const TrainingSample& dup = scene.train[pair.copy_frame];
    // Jitter shifts which landmarks fall in range, so the clouds compare as
    // point sets: most duplicate points sit a small nearest-neighbor distance
    // from the source cloud, but not at zero.
    std::vector<double> nn;
    for (const Vec3& p : dup.sensor.points) {
        double best = 1e18;
        for (const Vec3& q : src.sensor.points) best = std::min(best, (p - q).norm());
        nn.push_back(best);
    }
    std::sort(nn.begin(), nn.end());
    const double median_nn = nn[nn.size() / 2];
    CHECK(median_nn > 1e-6);
    CHECK(median_nn < 0.5);
}

TEST_CASE("backbone features are identical for duplicated frames") {
    const SyntheticScene scene = generate_scene(aliased_scene_spec(4));
    const FrozenBackbone backbone(small_backbone_config());
    const AliasPair pair = scene.train_alias_pairs[3];
    const Vector ga = backbone.global_feature(scene.train[pair.source_frame].sensor);
    const Vector gb = backbone.global_feature(scene.train[pair.copy_frame].sensor);
    CHECK((ga - gb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backbone global feature is permutation invariant and fixed width") {
    const FrozenBackbone backbone(small_backbone_config());
    Rng rng(167);
    PointCloud cloud = testing::random_cloud(rng, 40);
    const Vector g1 = backbone.global_feature(cloud);
    std::reverse(cloud.points.begin(), cloud.points.end());
    const Vector g2 = backbone.global_feature(cloud);
    CHECK((g1 - g2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(g1.size() == 99);

    const Matrix dense = backbone.dense_features(cloud);
    CHECK(dense.cols() == 99);
    CHECK(dense.rows() == 40);
}

TEST_CASE("assemble_inputs repeats the guidance vector per row") {
    Matrix dense(3, 2);
    dense << 1, 2, 3, 4, 5, 6;
    Vector guide(2);
    guide << 7, 8;
    const Matrix x = assemble_inputs(dense, guide);
    CHECK(x.cols() == 4);
    CHECK(x(0, 2) == 7);
    CHECK(x(2, 3) == 8);
    const Matrix bare = assemble_inputs(dense, std::nullopt);
    CHECK(bare.cols() == 2);
}

namespace {

TrainConfig quick_train_config() {
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.points_per_frame = 48;
    cfg.hidden_width = 64;
    cfg.hidden_layers = 2;
    cfg.lr_min = 1e-4;
    cfg.lr_max = 2e-3;
    cfg.optimizer = Optimizer::Kind::Adam;
    cfg.strategy = PruneStrategy::None;
    cfg.seed = 15;
    return cfg;
}

}  // namespace

TEST_CASE("short training run reduces the loss and is deterministic") {
    SceneSpec spec = small_scene_spec();
    spec.train_frames = 60;
    spec.test_frames = 10;
    const SyntheticScene scene = generate_scene(spec);
    const FrozenBackbone backbone(small_backbone_config());

    const TrainConfig cfg = quick_train_config();
    const TrainResult a = train_scr(scene, backbone, nullptr, cfg);
    CHECK(a.loss_history.back().mean_loss < a.loss_history.front().mean_loss);
    CHECK(a.sample_evaluations == 8 * 60);

    const TrainResult b = train_scr(scene, backbone, nullptr, cfg);
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
        CHECK(a.loss_history[i].mean_loss == b.loss_history[i].mean_loss);  // bit-identical
    }
    for (std::size_t l = 0; l < a.head.layer_count(); ++l) {
        CHECK(a.head.layers()[l].weight == b.head.layers()[l].weight);
    }
}

TEST_CASE("frozen backbone outputs are bit-identical before and after training") {
    SceneSpec spec = small_scene_spec();
    spec.train_frames = 40;
    spec.test_frames = 4;
    const SyntheticScene scene = generate_scene(spec);
    const FrozenBackbone backbone(small_backbone_config());
    const Matrix before = backbone.dense_features(scene.train[0].sensor);
    TrainConfig cfg = quick_train_config();
    cfg.epochs = 3;
    train_scr(scene, backbone, nullptr, cfg);
    const Matrix after = backbone.dense_features(scene.train[0].sensor);
    CHECK(before == after);
}

TEST_CASE("oracle regressor evaluates to zero error") {
    SceneSpec spec = small_scene_spec();
    spec.train_frames = 24;
    spec.test_frames = 8;
    const SyntheticScene scene = generate_scene(spec);

    RansacParams ransac;
    ransac.inlier_threshold = 0.25;
    ransac.seed = 19;
    // Inject ground-truth coordinates directly. The orientation bound is the
    // acos conditioning floor near zero, not solver error.
    for (const TrainingSample& frame : scene.test) {
        const RansacResult r = localize(frame.world, frame.sensor, ransac);
        const PoseError e = pose_error(r.pose, frame.gt_pose);
        CHECK(e.position_m < 1e-9);
        CHECK(e.orientation_deg < 1e-5);
    }
}

TEST_CASE("evaluate counts unsolvable frames as failures rather than errors") {
    SceneSpec spec = small_scene_spec();
    spec.train_frames = 24;
    spec.test_frames = 4;
    const SyntheticScene scene = generate_scene(spec);
    const FrozenBackbone backbone(small_backbone_config());

    // An untrained head emits near-constant coordinates: no consensus at a
    // tight threshold.
    const Mlp head = Mlp::make({99, 32, 3}, 3);
    RansacParams ransac;
    ransac.inlier_threshold = 0.05;
    ransac.min_inlier_fraction = 0.5;
    ransac.seed = 23;
    const EvalResult result = evaluate(head, backbone, nullptr, scene.test, ransac);
    CHECK(result.failures == result.frames.size());
    CHECK(result.mean_position == 0.0);
}

TEST_CASE("guidance separability on the aliased scene") {
    SceneSpec spec = aliased_scene_spec(2);
    spec.alias_region_frames = 8;
    const SyntheticScene scene = generate_scene(spec);
    const FrozenBackbone backbone(small_backbone_config());

    const AliasPair pair = scene.train_alias_pairs[4];
    const Matrix dense_a = backbone.dense_features(scene.train[pair.source_frame].sensor);
    const Matrix dense_b = backbone.dense_features(scene.train[pair.copy_frame].sensor);
    CHECK((dense_a - dense_b).cwiseAbs().maxCoeff() < 1e-9);  // raw features identical

    // Training-mode guidance vectors differ for the two frames (independent
    // noise draws), so the concatenated inputs separate what the dense
    // features cannot.
    Vector p1 = Vector::Constant(4, 0.25);
    Rng rng_a(derive_seed(1, "guidance", pair.source_frame));
    Rng rng_b(derive_seed(1, "guidance", pair.copy_frame));
    const Vector ga = guidance_feature(p1, 0.1, rng_a);
    const Vector gb = guidance_feature(p1, 0.1, rng_b);
    CHECK((ga - gb).norm() > 1e-6);

    const Matrix in_a = assemble_inputs(dense_a, ga);
    const Matrix in_b = assemble_inputs(dense_b, gb);
    CHECK((in_a - in_b).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("points_per_frame larger than the frame is rejected") {
    SceneSpec spec = small_scene_spec();
    spec.train_frames = 20;
    spec.test_frames = 2;
    const SyntheticScene scene = generate_scene(spec);
    const FrozenBackbone backbone(small_backbone_config());
    TrainConfig cfg = quick_train_config();
    cfg.points_per_frame = 100000;
    CHECK_THROWS_AS(train_scr(scene, backbone, nullptr, cfg), Error);
}
