#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lightloc/geometry.hpp"
#include "test_support.hpp"

using namespace lightloc;
namespace fs = std::filesystem;

TEST_CASE("compose identity cases") {
    const Pose id = Pose::identity();
    const Pose composed = compose(id, id);
    CHECK((composed.rotation - Mat3::Identity()).norm() == doctest::Approx(0.0));
    CHECK(composed.translation.norm() == doctest::Approx(0.0));

    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        const Pose p = testing::random_pose(rng);
        const Pose round = compose(p, invert(p));
        CHECK((round.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(round.translation.norm() < 1e-9);
    }
}

TEST_CASE("compose of yaw rotations adds angles") {
    const Pose a = yaw_pose(30.0 * M_PI / 180.0);
    const Pose b = yaw_pose(60.0 * M_PI / 180.0);
    const Pose c = compose(a, b);
    const Pose expected = yaw_pose(90.0 * M_PI / 180.0);
    CHECK((c.rotation - expected.rotation).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("compose is associative on random poses") {
    Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        const Pose a = testing::random_pose(rng);
        const Pose b = testing::random_pose(rng);
        const Pose c = testing::random_pose(rng);
        const Pose left = compose(compose(a, b), c);
        const Pose right = compose(a, compose(b, c));
        CHECK((left.rotation - right.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((left.translation - right.translation).norm() < 1e-9);
    }
}

TEST_CASE("transform applies R p + t and flips the frame tag") {
    PointCloud cloud;
    cloud.frame = Frame::Sensor;
    cloud.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};

    SUBCASE("identity pose keeps coordinates") {
        const PointCloud out = transform(Pose::identity(), cloud);
        CHECK(out.frame == Frame::World);
        CHECK((out.points[1] - Vec3(1, 0, 0)).norm() == doctest::Approx(0.0));
    }
    SUBCASE("pure translation moves the origin") {
        Pose p;
        p.translation = Vec3(1, 2, 3);
        const PointCloud out = transform(p, cloud);
        CHECK((out.points[0] - Vec3(1, 2, 3)).norm() == doctest::Approx(0.0));
    }
    SUBCASE("yaw 90 maps +x to +y") {
        const PointCloud out = transform(yaw_pose(M_PI / 2.0), cloud);
        CHECK((out.points[1] - Vec3(0, 1, 0)).norm() < 1e-9);
    }
    SUBCASE("world-frame input is rejected") {
        PointCloud world = cloud;
        world.frame = Frame::World;
        CHECK_THROWS_WITH_AS(transform(Pose::identity(), world), doctest::Contains("sensor"),
                             Error);
    }
}

TEST_CASE("transform round-trips through the inverse pose") {
    Rng rng(13);
    for (int i = 0; i < 10; ++i) {
        const Pose p = testing::random_pose(rng);
        const PointCloud cloud = testing::random_cloud(rng, 50);
        PointCloud world = transform(p, cloud);
        world.frame = Frame::Sensor;  // reuse transform for the inverse direction
        const PointCloud back = transform(invert(p), world);
        for (std::size_t j = 0; j < cloud.size(); ++j) {
            CHECK((back.points[j] - cloud.points[j]).norm() < 1e-9);
        }
    }
}

TEST_CASE("pose_error examples") {
    const Pose id = Pose::identity();
    SUBCASE("identical poses") {
        const PoseError e = pose_error(id, id);
        CHECK(e.position_m == doctest::Approx(0.0));
        CHECK(e.orientation_deg == doctest::Approx(0.0));
    }
    SUBCASE("3-4-5 translation") {
        Pose pred = id;
        pred.translation = Vec3(3, 4, 0);
        const PoseError e = pose_error(pred, id);
        CHECK(e.position_m == doctest::Approx(5.0));
        CHECK(e.orientation_deg == doctest::Approx(0.0));
    }
    SUBCASE("90 degree yaw difference") {
        const PoseError e = pose_error(yaw_pose(M_PI / 2.0), id);
        CHECK(e.position_m == doctest::Approx(0.0));
        CHECK(e.orientation_deg == doctest::Approx(90.0).epsilon(1e-9));
    }
}

TEST_CASE("orientation error is symmetric and bounded") {
    Rng rng(17);
    for (int i = 0; i < 30; ++i) {
        const Pose a = testing::random_pose(rng);
        const Pose b = testing::random_pose(rng);
        const PoseError ab = pose_error(a, b);
        const PoseError ba = pose_error(b, a);
        CHECK(ab.orientation_deg == doctest::Approx(ba.orientation_deg).epsilon(1e-9));
        CHECK(ab.orientation_deg >= 0.0);
        CHECK(ab.orientation_deg <= 180.0);
    }
}

TEST_CASE("orthonormalize repairs drifted rotations") {
    Rng rng(19);
    const Pose p = testing::random_pose(rng);
    Mat3 drifted = p.rotation;
    drifted(0, 0) += 1e-6;
    const Mat3 fixed = orthonormalize(drifted);
    CHECK(is_valid_rotation(fixed));
}

TEST_CASE("pose text file round-trip with comma and whitespace separators") {
    const fs::path dir = fs::temp_directory_path() / "lightloc_geom_test";
    fs::create_directories(dir);
    const std::string path = (dir / "poses.txt").string();

    Rng rng(23);
    std::vector<TimedPose> poses;
    for (int i = 0; i < 5; ++i) {
        TimedPose tp;
        tp.timestamp = 0.1 * i;
        tp.pose = testing::random_pose(rng);
        poses.push_back(tp);
    }
    write_pose_file(path, poses);
    const auto back = read_pose_file(path);
    REQUIRE(back.size() == poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        CHECK((back[i].pose.rotation - poses[i].pose.rotation).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((back[i].pose.translation - poses[i].pose.translation).norm() < 1e-12);
    }

    // Comma-separated variant of the same data parses identically.
    {
        std::ifstream in(path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        for (char& c : text) {
            if (c == ' ') c = ',';
        }
        std::ofstream out(path);
        out << "# comma separated\n" << text;
    }
    const auto commas = read_pose_file(path);
    REQUIRE(commas.size() == poses.size());
    CHECK((commas[2].pose.translation - back[2].pose.translation).norm() < 1e-12);
    fs::remove_all(dir);
}

TEST_CASE("point cloud binary format round-trips and infers the count") {
    const fs::path dir = fs::temp_directory_path() / "lightloc_cloud_test";
    fs::create_directories(dir);
    const std::string path = (dir / "cloud.bin").string();

    Rng rng(29);
    const PointCloud cloud = testing::random_cloud(rng, 37);
    write_point_cloud(path, cloud);
    CHECK(fs::file_size(path) == 37 * 12);
    const PointCloud back = read_point_cloud(path, Frame::Sensor);
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK((back.points[i] - cloud.points[i]).norm() < 1e-5);  // float32 storage
    }

    std::ofstream(path, std::ios::binary) << "abc";  // 3 bytes: not a multiple of 12
    CHECK_THROWS_AS(read_point_cloud(path, Frame::Sensor), Error);
    fs::remove_all(dir);
}
