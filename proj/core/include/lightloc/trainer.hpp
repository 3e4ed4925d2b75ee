#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lightloc/backbone.hpp"
#include "lightloc/classifier.hpp"
#include "lightloc/mlp.hpp"
#include "lightloc/pose_solver.hpp"
#include "lightloc/rsd.hpp"
#include "lightloc/scene.hpp"

namespace lightloc {

// Mean per-point L1 distance between predicted and ground-truth world
// coordinates, plus the per-point values for the scheduler's medians.
// Rows are points, columns xyz. Throws LengthMismatch.
struct L1Loss {
    double mean = 0.0;
    std::vector<double> per_point;
};
L1Loss l1_scene_loss(const Matrix& pred_world, const Matrix& gt_world);

// Subgradient of the mean-L1 loss with respect to the predictions
// (sign(pred - gt) / n, 0 at exact agreement).
Matrix l1_scene_loss_grad(const Matrix& pred_world, const Matrix& gt_world);

// Sensor-cloud jitter used during training; ground-truth world targets stay
// fixed. Matches the translation/rotation ranges used for backbone training.
struct AugmentSpec {
    bool enabled = false;
    double probability = 0.5;
    double max_translation = 1.0;    // +/- meters along x and y
    double max_roll_pitch_deg = 5.0;
    double max_yaw_deg = 10.0;
};

enum class PruneStrategy { None, Rsd, Random, Uniform };

struct TrainConfig {
    int epochs = 25;
    int batch_frames = 16;  // frames per optimizer step
    int points_per_frame = 128;
    int hidden_width = 128;
    int hidden_layers = 3;
    double lr_min = 5e-4;
    double lr_max = 5e-3;
    Optimizer::Kind optimizer = Optimizer::Kind::Adam;
    double weight_decay = 1e-2;
    AugmentSpec augment;
    bool scg_enabled = false;
    double scg_sigma = 0.1;
    PruneStrategy strategy = PruneStrategy::None;
    RsdConfig rsd;
    std::uint64_t seed = 0;
};

struct LossHistoryRow {
    int epoch = 0;
    double mean_loss = 0.0;
    std::size_t active_size = 0;
};

struct TrainResult {
    Mlp head;
    std::vector<LossHistoryRow> loss_history;
    std::vector<RsdAuditRow> rsd_audit;
    long sample_evaluations = 0;  // frames processed, summed over epochs
};

// Trains the scene-coordinate regression head. Per frame and epoch:
// sample points, concatenate the frame's guidance feature to each point's
// dense feature when SCG is enabled, take one optimizer step on the mean-L1
// loss, and feed the per-point losses to the scheduler. Deterministic given
// config.seed.
TrainResult train_scr(const SyntheticScene& scene, const FrozenBackbone& backbone,
                      const ClassifierHead* classifier, const TrainConfig& config);

struct FrameEval {
    std::uint64_t frame_id = 0;
    bool solved = false;
    PoseError error;
    std::size_t inlier_count = 0;
    double mean_inlier_residual = 0.0;
    double median_inlier_residual = 0.0;
};

struct EvalResult {
    std::vector<FrameEval> frames;
    std::size_t failures = 0;  // NoConsensus frames, excluded from the stats
    double mean_position = 0.0;
    double median_position = 0.0;
    double mean_orientation = 0.0;
    double median_orientation = 0.0;
};

// Runs the head over test frames (guidance with sigma = 0), solves each pose
// with RANSAC, and aggregates errors. NoConsensus frames count as failures.
EvalResult evaluate(const Mlp& head, const FrozenBackbone& backbone,
                    const ClassifierHead* classifier, const std::vector<TrainingSample>& frames,
                    const RansacParams& ransac);

// Input assembly shared by training and evaluation: dense rows, optionally
// with the frame guidance vector appended to every row.
Matrix assemble_inputs(const Matrix& dense, const std::optional<Vector>& guidance);

// Versioned binary serialization of a trained regression head ("LLRH").
// Stores the MLP together with the input layout it expects.
struct RegressionHeadFile {
    Mlp head;
    int feature_dim = 0;
    int guidance_dim = 0;  // 0 when SCG was disabled
};
void save_regression_head(const std::string& path, const RegressionHeadFile& file);
RegressionHeadFile load_regression_head(const std::string& path);

void write_loss_history_csv(const std::string& path, const std::vector<LossHistoryRow>& rows,
                            const std::string& config_hash);

}  // namespace lightloc
