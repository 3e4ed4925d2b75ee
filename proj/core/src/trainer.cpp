#include "lightloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "lightloc/serial.hpp"

namespace lightloc {

L1Loss l1_scene_loss(const Matrix& pred_world, const Matrix& gt_world) {
    if (pred_world.rows() != gt_world.rows() || pred_world.cols() != 3 || gt_world.cols() != 3) {
        throw Error(ErrorCode::LengthMismatch, "prediction/target shape mismatch");
    }
    if (pred_world.rows() == 0) {
        throw Error(ErrorCode::LengthMismatch, "empty prediction batch");
    }
    L1Loss loss;
    loss.per_point.resize(static_cast<std::size_t>(pred_world.rows()));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pred_world.rows(); ++i) {
        const double v = (pred_world.row(i) - gt_world.row(i)).cwiseAbs().sum();
        loss.per_point[static_cast<std::size_t>(i)] = v;
        sum += v;
    }
    loss.mean = sum / static_cast<double>(pred_world.rows());
    return loss;
}

Matrix l1_scene_loss_grad(const Matrix& pred_world, const Matrix& gt_world) {
    const double inv_n = 1.0 / static_cast<double>(pred_world.rows());
    Matrix g(pred_world.rows(), pred_world.cols());
    for (Eigen::Index i = 0; i < pred_world.rows(); ++i) {
        for (Eigen::Index j = 0; j < pred_world.cols(); ++j) {
            const double d = pred_world(i, j) - gt_world(i, j);
            g(i, j) = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
        }
    }
    return g;
}

Matrix assemble_inputs(const Matrix& dense, const std::optional<Vector>& guidance) {
    if (!guidance) return dense;
    Matrix x(dense.rows(), dense.cols() + guidance->size());
    x.leftCols(dense.cols()) = dense;
    x.rightCols(guidance->size()) = guidance->transpose().replicate(dense.rows(), 1);
    return x;
}

namespace {

PointCloud jitter_cloud(const PointCloud& sensor, const AugmentSpec& aug, Rng& rng) {
    if (!aug.enabled || rng.uniform() >= aug.probability) return sensor;
    const double deg = M_PI / 180.0;
    const Vec3 t(rng.uniform(-aug.max_translation, aug.max_translation),
                 rng.uniform(-aug.max_translation, aug.max_translation), 0.0);
    const double roll = rng.uniform(-aug.max_roll_pitch_deg, aug.max_roll_pitch_deg) * deg;
    const double pitch = rng.uniform(-aug.max_roll_pitch_deg, aug.max_roll_pitch_deg) * deg;
    const double yaw = rng.uniform(-aug.max_yaw_deg, aug.max_yaw_deg) * deg;
    const Mat3 r = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                    Eigen::AngleAxisd(roll, Vec3::UnitX()))
                       .toRotationMatrix();
    PointCloud out;
    out.frame = Frame::Sensor;
    out.points.reserve(sensor.size());
    for (const Vec3& p : sensor.points) out.points.push_back(r * p + t);
    return out;
}

// Survivor selection for the comparison pruning strategies run at the same
// schedule and budget as the scheduler proper.
std::vector<std::uint64_t> baseline_survivors(const std::vector<std::uint64_t>& active,
                                              double downsample_ratio, PruneStrategy strategy,
                                              Rng& rng) {
    const std::size_t keep = static_cast<std::size_t>(
        std::floor((1.0 - downsample_ratio) * static_cast<double>(active.size())));
    std::vector<std::uint64_t> survivors;
    survivors.reserve(keep);
    if (strategy == PruneStrategy::Random) {
        std::vector<std::size_t> picks = rng.sample_without_replacement(active.size(), keep);
        std::sort(picks.begin(), picks.end());
        for (std::size_t i : picks) survivors.push_back(active[i]);
    } else {  // Uniform: evenly strided by rank
        const double stride = static_cast<double>(active.size()) / static_cast<double>(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            survivors.push_back(active[static_cast<std::size_t>(static_cast<double>(i) * stride)]);
        }
    }
    return survivors;
}

struct FrameCache {
    Matrix dense;
    Vector guidance_base;  // level-1 probabilities (unnormalized guidance)
    bool valid = false;
};

}  // namespace

TrainResult train_scr(const SyntheticScene& scene, const FrozenBackbone& backbone,
                      const ClassifierHead* classifier, const TrainConfig& config) {
    if (scene.train.empty()) throw Error(ErrorCode::InvalidSpec, "scene has no training frames");
    if (config.scg_enabled && classifier == nullptr) {
        throw Error(ErrorCode::InvalidConfig, "scg enabled but no trained classifier given");
    }
    for (const TrainingSample& f : scene.train) {
        if (config.points_per_frame > static_cast<int>(f.sensor.size())) {
            throw Error(ErrorCode::InvalidConfig,
                        "points_per_frame exceeds frame " + std::to_string(f.id) + " size");
        }
    }

    const int guidance_dim = config.scg_enabled ? classifier->k1() : 0;
    const int input_dim = backbone.feature_dim() + guidance_dim;

    // Layer 0 is a trainable affine initialized to whiten the dense features
    // (statistics over the unaugmented training clouds); the guidance block
    // is already unit scale and passes through. ReLU hidden layers follow,
    // with one residual skip across the last hidden pair.
    Vector feat_mean = Vector::Zero(backbone.feature_dim());
    Vector feat_var = Vector::Zero(backbone.feature_dim());
    {
        long rows = 0;
        for (const TrainingSample& f : scene.train) {
            const Matrix dense = backbone.dense_features(f.sensor);
            feat_mean += dense.colwise().sum().transpose();
            rows += dense.rows();
        }
        feat_mean /= static_cast<double>(rows);
        for (const TrainingSample& f : scene.train) {
            const Matrix dense = backbone.dense_features(f.sensor);
            feat_var +=
                (dense.rowwise() - feat_mean.transpose()).array().square().colwise().sum().matrix();
        }
        feat_var /= static_cast<double>(rows);
    }

    std::vector<int> widths = {input_dim, input_dim};
    for (int i = 0; i < config.hidden_layers; ++i) widths.push_back(config.hidden_width);
    widths.push_back(3);
    std::vector<SkipLink> skips;
    if (config.hidden_layers >= 2) {
        skips.push_back({config.hidden_layers - 1, config.hidden_layers});
    }

    TrainResult result;
    result.head = Mlp::make(widths, derive_seed(config.seed, "scr.init"), skips);
    {
        MlpLayer& whiten = result.head.layers()[0];
        whiten.activation = Activation::Identity;
        whiten.weight.setZero();
        whiten.bias.setZero();
        for (int i = 0; i < input_dim; ++i) {
            if (i < backbone.feature_dim()) {
                const double inv = 1.0 / std::sqrt(std::max(feat_var(i), 1e-12));
                whiten.weight(i, i) = inv;
                whiten.bias(i) = -feat_mean(i) * inv;
            } else {
                whiten.weight(i, i) = 1.0;
            }
        }
    }

    Optimizer optimizer(config.optimizer, config.weight_decay);

    std::vector<std::uint64_t> ids;
    ids.reserve(scene.train.size());
    std::unordered_map<std::uint64_t, std::size_t> frame_index;
    for (std::size_t i = 0; i < scene.train.size(); ++i) {
        ids.push_back(scene.train[i].id);
        frame_index[scene.train[i].id] = i;
    }

    std::optional<RsdScheduler> rsd;
    std::optional<StageEpochs> baseline_stages;
    std::vector<std::uint64_t> active = ids;
    if (config.strategy == PruneStrategy::Rsd) {
        RsdConfig rc = config.rsd;
        rc.total_epochs = config.epochs;
        rsd.emplace(rc, ids);
    } else if (config.strategy == PruneStrategy::Random || config.strategy == PruneStrategy::Uniform) {
        RsdConfig rc = config.rsd;
        rc.total_epochs = config.epochs;
        baseline_stages = stage_epochs(rc);
    }

    // Dense features and classifier probabilities are fixed per frame unless
    // augmentation perturbs the cloud each epoch.
    std::vector<FrameCache> cache(scene.train.size());
    const bool cacheable = !config.augment.enabled;

    Rng order_rng(derive_seed(config.seed, "scr.order"));
    Rng prune_rng(derive_seed(config.seed, "scr.baseline_prune"));

    const int batch_frames = std::max(1, config.batch_frames);
    const long planned_steps =
        static_cast<long>(config.epochs) *
        ((static_cast<long>(scene.train.size()) + batch_frames - 1) / batch_frames);
    long step_idx = 0;
    const int points = config.points_per_frame;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (rsd) {
            const RsdAction action = rsd->epoch_transition(epoch);
            if (action == RsdAction::Prune) rsd->prune();
            active = rsd->active_set();
        } else if (baseline_stages) {
            const int s = config.rsd.window;
            if (epoch == baseline_stages->first_prune + s ||
                epoch == baseline_stages->second_prune + s) {
                active = baseline_survivors(active, config.rsd.downsample_ratio, config.strategy,
                                            prune_rng);
            } else if (epoch == baseline_stages->restore) {
                active = ids;
            }
        }

        std::vector<std::uint64_t> order = active;
        order_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_frames)) {
            const std::size_t count =
                std::min(static_cast<std::size_t>(batch_frames), order.size() - begin);
            Matrix inputs(static_cast<Eigen::Index>(count) * points, input_dim);
            Matrix targets(static_cast<Eigen::Index>(count) * points, 3);

            for (std::size_t b = 0; b < count; ++b) {
                const std::uint64_t id = order[begin + b];
                const TrainingSample& frame = scene.train[frame_index.at(id)];
                // Per-frame randomness is keyed by (epoch, id) so batching and
                // presentation order cannot change the draws.
                Rng frame_rng(derive_seed(config.seed, "scr.frame",
                                          (static_cast<std::uint64_t>(epoch) << 32) ^ id));

                const Matrix* dense = nullptr;
                Vector p1;
                Matrix fresh_dense;
                FrameCache& slot = cache[frame_index.at(id)];
                if (cacheable && slot.valid) {
                    dense = &slot.dense;
                    if (config.scg_enabled) p1 = slot.guidance_base;
                } else {
                    const PointCloud cloud = jitter_cloud(frame.sensor, config.augment, frame_rng);
                    fresh_dense = backbone.dense_features(cloud);
                    if (config.scg_enabled) {
                        p1 = classifier->forward(backbone.global_feature(fresh_dense))
                                 .p1.row(0)
                                 .transpose();
                    }
                    if (cacheable) {
                        slot.dense = std::move(fresh_dense);
                        slot.guidance_base = p1;
                        slot.valid = true;
                        dense = &slot.dense;
                    } else {
                        dense = &fresh_dense;
                    }
                }

                const std::vector<std::size_t> picks = frame_rng.sample_without_replacement(
                    frame.sensor.size(), static_cast<std::size_t>(points));
                std::optional<Vector> guidance;
                if (config.scg_enabled) {
                    guidance = guidance_feature(p1, config.scg_sigma, frame_rng);
                }
                const Eigen::Index row0 = static_cast<Eigen::Index>(b) * points;
                for (std::size_t i = 0; i < picks.size(); ++i) {
                    const Eigen::Index row = row0 + static_cast<Eigen::Index>(i);
                    inputs.row(row).head(dense->cols()) =
                        dense->row(static_cast<Eigen::Index>(picks[i]));
                    if (guidance) inputs.row(row).tail(guidance->size()) = guidance->transpose();
                    targets.row(row) = frame.world.points[picks[i]].transpose();
                }
            }

            MlpTrace trace;
            const Matrix pred = result.head.forward(inputs, trace);
            const L1Loss loss = l1_scene_loss(pred, targets);

            MlpGradients grads;
            result.head.backward(trace, l1_scene_loss_grad(pred, targets), grads);
            const double progress =
                static_cast<double>(step_idx) / static_cast<double>(planned_steps);
            optimizer.step(result.head, grads, one_cycle_lr(config.lr_min, config.lr_max, progress));
            ++step_idx;

            // Per-frame slices feed the scheduler and the loss history.
            for (std::size_t b = 0; b < count; ++b) {
                const std::uint64_t id = order[begin + b];
                const auto first = loss.per_point.begin() + static_cast<long>(b) * points;
                const std::vector<double> frame_losses(first, first + points);
                double frame_mean = 0.0;
                for (double v : frame_losses) frame_mean += v;
                epoch_loss += frame_mean / static_cast<double>(points);
                if (rsd) rsd->record_median_loss(id, frame_losses);
            }
        }
        result.sample_evaluations += static_cast<long>(order.size());
        result.loss_history.push_back(
            {epoch, order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size()),
             active.size()});
    }

    if (rsd) result.rsd_audit = rsd->audit();
    return result;
}

EvalResult evaluate(const Mlp& head, const FrozenBackbone& backbone,
                    const ClassifierHead* classifier, const std::vector<TrainingSample>& frames,
                    const RansacParams& ransac) {
    EvalResult result;
    std::vector<double> pos, ori;
    Rng dummy_rng(0);  // sigma = 0 draws nothing
    for (const TrainingSample& frame : frames) {
        const Matrix dense = backbone.dense_features(frame.sensor);
        std::optional<Vector> guidance;
        if (classifier != nullptr) {
            const Vector p1 =
                classifier->forward(backbone.global_feature(dense)).p1.row(0).transpose();
            guidance = guidance_feature(p1, 0.0, dummy_rng);
        }
        const Matrix pred = head.forward(assemble_inputs(dense, guidance));

        PointCloud predicted_world;
        predicted_world.frame = Frame::World;
        predicted_world.points.reserve(static_cast<std::size_t>(pred.rows()));
        for (Eigen::Index i = 0; i < pred.rows(); ++i) {
            predicted_world.points.emplace_back(pred(i, 0), pred(i, 1), pred(i, 2));
        }

        FrameEval fe;
        fe.frame_id = frame.id;
        try {
            const RansacResult rr = localize(predicted_world, frame.sensor, ransac);
            fe.solved = true;
            fe.error = pose_error(rr.pose, frame.gt_pose);
            fe.inlier_count = rr.inlier_count;
            fe.mean_inlier_residual = rr.mean_inlier_residual;
            fe.median_inlier_residual = rr.median_inlier_residual;
            pos.push_back(fe.error.position_m);
            ori.push_back(fe.error.orientation_deg);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoConsensus) throw;
            fe.solved = false;
            ++result.failures;
        }
        result.frames.push_back(fe);
    }
    auto mean_of = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    result.mean_position = mean_of(pos);
    result.mean_orientation = mean_of(ori);
    if (!pos.empty()) {
        result.median_position = median(pos);
        result.median_orientation = median(ori);
    }
    return result;
}

namespace {
constexpr char kRegressorMagic[4] = {'L', 'L', 'R', 'H'};
constexpr std::uint16_t kRegressorVersion = 1;
}  // namespace

void save_regression_head(const std::string& path, const RegressionHeadFile& file) {
    BinaryWriter w(path);
    w.magic(kRegressorMagic);
    w.u16(kRegressorVersion);
    w.u32(static_cast<std::uint32_t>(file.feature_dim));
    w.u32(static_cast<std::uint32_t>(file.guidance_dim));
    write_mlp(w, file.head);
    w.close();
}

RegressionHeadFile load_regression_head(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kRegressorMagic);
    r.expect_version(kRegressorVersion);
    RegressionHeadFile file;
    file.feature_dim = static_cast<int>(r.u32());
    file.guidance_dim = static_cast<int>(r.u32());
    file.head = read_mlp(r);
    return file;
}

void write_loss_history_csv(const std::string& path, const std::vector<LossHistoryRow>& rows,
                            const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "epoch,mean_loss,active_size,config_hash\n";
    char buf[192];
    for (const LossHistoryRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%zu,%s\n", r.epoch, r.mean_loss, r.active_size,
                      config_hash.c_str());
        out << buf;
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace lightloc
