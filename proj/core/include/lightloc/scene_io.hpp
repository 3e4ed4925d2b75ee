#pragma once

#include <string>

#include "lightloc/scene.hpp"

namespace lightloc {

// On-disk scene layout under a run directory:
//   poses_train.txt, poses_test.txt   pose text format, timestamp = index
//   frames/train_00000.bin ...        point cloud binaries (sensor frame)
//   frames/test_00000.bin ...
//   manifest.txt                      checksums of everything above
// World-frame targets are not stored; they are recomputed exactly as
// transform(gt_pose, sensor).
void write_scene_dir(const std::string& dir, const SyntheticScene& scene,
                     const std::string& config_hash, std::uint64_t seed);

struct SceneOnDisk {
    std::vector<TrainingSample> train;
    std::vector<TrainingSample> test;
};

// Throws MissingArtifact when the directory lacks the manifest or a listed
// file, IoError on malformed content.
SceneOnDisk read_scene_dir(const std::string& dir);

}  // namespace lightloc
