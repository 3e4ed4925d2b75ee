#include "lightloc/scene_io.hpp"

#include <cstdio>
#include <filesystem>

#include "lightloc/report.hpp"

namespace fs = std::filesystem;

namespace lightloc {

namespace {

std::string frame_name(const char* split, std::size_t index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "frames/%s_%05zu.bin", split, index);
    return buf;
}

void write_split(const std::string& dir, const char* split,
                 const std::vector<TrainingSample>& frames,
                 std::vector<ManifestEntry>& entries) {
    std::vector<TimedPose> poses;
    poses.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        poses.push_back({static_cast<double>(i), frames[i].gt_pose});
        const std::string rel = frame_name(split, i);
        write_point_cloud(dir + "/" + rel, frames[i].sensor);
        entries.push_back({rel, file_checksum(dir + "/" + rel)});
    }
    const std::string pose_rel = std::string("poses_") + split + ".txt";
    write_pose_file(dir + "/" + pose_rel, poses);
    entries.push_back({pose_rel, file_checksum(dir + "/" + pose_rel)});
}

std::vector<TrainingSample> read_split(const std::string& dir, const char* split) {
    const std::string pose_path = dir + "/poses_" + split + ".txt";
    if (!fs::exists(pose_path)) {
        throw Error(ErrorCode::MissingArtifact, pose_path + " does not exist");
    }
    const std::vector<TimedPose> poses = read_pose_file(pose_path);
    std::vector<TrainingSample> frames;
    frames.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const std::string cloud_path = dir + "/" + frame_name(split, i);
        if (!fs::exists(cloud_path)) {
            throw Error(ErrorCode::MissingArtifact, cloud_path + " does not exist");
        }
        TrainingSample sample;
        sample.id = static_cast<std::uint64_t>(i);
        sample.gt_pose = poses[i].pose;
        sample.sensor = read_point_cloud(cloud_path, Frame::Sensor);
        sample.world = transform(sample.gt_pose, sample.sensor);
        frames.push_back(std::move(sample));
    }
    return frames;
}

}  // namespace

void write_scene_dir(const std::string& dir, const SyntheticScene& scene,
                     const std::string& config_hash, std::uint64_t seed) {
    fs::create_directories(fs::path(dir) / "frames");
    std::vector<ManifestEntry> entries;
    write_split(dir, "train", scene.train, entries);
    write_split(dir, "test", scene.test, entries);
    write_manifest(dir + "/manifest.txt", config_hash, seed, entries);
}

SceneOnDisk read_scene_dir(const std::string& dir) {
    if (!fs::exists(fs::path(dir) / "manifest.txt")) {
        throw Error(ErrorCode::MissingArtifact, dir + "/manifest.txt does not exist (run generate)");
    }
    SceneOnDisk scene;
    scene.train = read_split(dir, "train");
    scene.test = read_split(dir, "test");
    return scene;
}

}  // namespace lightloc
