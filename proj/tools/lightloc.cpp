// lightloc command-line tool: synthetic scene generation, hierarchical
// clustering, classifier and regressor training, RANSAC localization, Kalman
// fusion, and report aggregation. Stages communicate through artifacts in a
// shared run directory, so each command is resumable and idempotent for
// identical inputs.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "lightloc/classifier.hpp"
#include "lightloc/clustering.hpp"
#include "lightloc/config.hpp"
#include "lightloc/fusion.hpp"
#include "lightloc/report.hpp"
#include "lightloc/rsd.hpp"
#include "lightloc/scene_io.hpp"
#include "lightloc/trainer.hpp"

namespace fs = std::filesystem;
using namespace lightloc;

namespace {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

LogLevel log_threshold() {
    const char* env = std::getenv("LIGHTLOC_LOG");
    if (env == nullptr) return LogLevel::Info;
    const std::string v = env;
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    if (v == "warn") return LogLevel::Warn;
    if (v == "error") return LogLevel::Error;
    return LogLevel::Info;
}

void log_line(LogLevel level, const std::string& msg) {
    static const LogLevel threshold = log_threshold();
    if (level < threshold) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::cerr << "[lightloc:" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (key = value lines)");
    cmd->add_option("--out", args.out_dir, "run directory for artifacts");
    cmd->add_option("--seed", args.seed, "root seed override")
        ->each([&](const std::string&) { args.seed_given = true; });
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set rsd.window=3")
        ->take_all();
    cmd->add_flag("--force", args.force, "allow writing into a non-empty directory");
}

RunConfig resolve_config(const CommonArgs& args) {
    KvMap kv;
    if (!args.config_path.empty()) kv = load_kv_file(args.config_path);
    for (const std::string& item : args.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::UsageError, "--set expects key=value, got " + item);
        }
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    if (args.seed_given) kv["seed"] = std::to_string(args.seed);
    if (!args.out_dir.empty()) kv["out"] = args.out_dir;
    RunConfig config = RunConfig::from_kv(kv);
    log_line(LogLevel::Debug, "config hash " + config.hash());
    return config;
}

// Artifact names shared by the pipeline stages.
std::string clusters_path(const RunConfig& c) { return c.out_dir + "/clusters.llcm"; }
std::string labels_path(const RunConfig& c) { return c.out_dir + "/labels.csv"; }
std::string head_path(const RunConfig& c) { return c.out_dir + "/classifier.llch"; }
std::string regressor_path(const RunConfig& c) { return c.out_dir + "/regressor.llrh"; }

Eigen::MatrixXd cluster_positions(const std::vector<TrainingSample>& frames, int dims) {
    if (dims != 2 && dims != 3) {
        throw Error(ErrorCode::InvalidConfig, "scg.cluster_dims must be 2 or 3");
    }
    Eigen::MatrixXd positions(frames.size(), dims);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (int d = 0; d < dims; ++d) {
            positions(static_cast<Eigen::Index>(i), d) = frames[i].gt_pose.translation(d);
        }
    }
    return positions;
}

Vec3 leaf_center_3d(const ClusterModel& model, int level1, int level2) {
    const Eigen::VectorXd c = model.leaf_center(level1, level2);
    return Vec3(c(0), c(1), c.size() > 2 ? c(2) : 0.0);
}

struct LabelRows {
    std::vector<int> level1;
    std::vector<int> level2;
};

void write_labels_csv(const std::string& path, const LabelRows& labels,
                      const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "frame_id,level1,level2,config_hash\n";
    for (std::size_t i = 0; i < labels.level1.size(); ++i) {
        out << i << "," << labels.level1[i] << "," << labels.level2[i] << "," << config_hash
            << "\n";
    }
}

LabelRows read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, path + " does not exist (run cluster)");
    LabelRows labels;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        int id = 0, l1 = 0, l2 = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%d", &id, &l1, &l2) == 3) {
            labels.level1.push_back(l1);
            labels.level2.push_back(l2);
        }
    }
    return labels;
}

// Global features for every frame, the classifier's input cache.
Matrix global_feature_cache(const FrozenBackbone& backbone,
                            const std::vector<TrainingSample>& frames) {
    Matrix cache(frames.size(), backbone.feature_dim());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        cache.row(static_cast<Eigen::Index>(i)) =
            backbone.global_feature(frames[i].sensor).transpose();
    }
    return cache;
}

int cmd_generate(const RunConfig& config) {
    const fs::path out = config.out_dir;
    if (fs::exists(out) && !fs::is_empty(out)) {
        throw Error(ErrorCode::UsageError,
                    config.out_dir + " is not empty; pass --force to overwrite");
    }
    fs::create_directories(out);
    const SyntheticScene scene = generate_scene(config.scene_spec());
    write_scene_dir(config.out_dir, scene, config.hash(), config.seed);
    std::ofstream(out / "config.txt") << config.render();

    MetricTable metrics;
    metrics.rows = {{"train_frames", static_cast<double>(scene.train.size())},
                    {"test_frames", static_cast<double>(scene.test.size())},
                    {"landmarks", static_cast<double>(scene.landmarks.size())},
                    {"alias_pairs", static_cast<double>(scene.train_alias_pairs.size())}};
    write_metrics_csv((out / "metrics_generate.csv").string(), metrics, config.hash());
    log_line(LogLevel::Info, "generated " + std::to_string(scene.train.size()) + "+" +
                                 std::to_string(scene.test.size()) + " frames in " +
                                 config.out_dir);
    return 0;
}

int cmd_generate_forced(const RunConfig& config, bool force) {
    if (force && fs::exists(config.out_dir)) fs::remove_all(config.out_dir);
    return cmd_generate(config);
}

int cmd_cluster(const RunConfig& config) {
    const SceneOnDisk scene = read_scene_dir(config.out_dir);
    const Eigen::MatrixXd positions = cluster_positions(scene.train, config.scg.cluster_dims);
    const HierarchicalLabels labels = build_hierarchical_labels(
        positions, config.scg.k1, config.scg.k2, derive_seed(config.seed, "module.cluster"));
    save_cluster_model(clusters_path(config), labels.model);
    write_labels_csv(labels_path(config), {labels.level1, labels.level2}, config.hash());

    MetricTable metrics;
    metrics.rows = {{"k1", static_cast<double>(config.scg.k1)},
                    {"k2", static_cast<double>(config.scg.k2)},
                    {"leaf_count", static_cast<double>(config.scg.k1 * config.scg.k2)}};
    write_metrics_csv(config.out_dir + "/metrics_cluster.csv", metrics, config.hash());
    log_line(LogLevel::Info, "clustered into " + std::to_string(config.scg.k1) + "x" +
                                 std::to_string(config.scg.k2) + " leaves");
    return 0;
}

int cmd_train_classifier(const RunConfig& config) {
    const SceneOnDisk scene = read_scene_dir(config.out_dir);
    const LabelRows labels = read_labels_csv(labels_path(config));
    if (labels.level1.size() != scene.train.size()) {
        throw Error(ErrorCode::VersionMismatch, "labels.csv does not match the scene frame count");
    }
    const FrozenBackbone backbone(config.backbone_config());

    ClassifierHead::Batch cache;
    cache.features = global_feature_cache(backbone, scene.train);
    cache.level1 = labels.level1;
    cache.level2 = labels.level2;

    ClassifierTrainLog log;
    const ClassifierHead head =
        train_classifier(cache, config.classifier_config(backbone.feature_dim()), &log);
    save_classifier_head(head_path(config), head);

    MetricTable metrics;
    metrics.rows = {{"leaf_accuracy", log.final_leaf_accuracy},
                    {"epochs", static_cast<double>(config.scg.epochs)},
                    {"final_loss", log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back()}};
    write_metrics_csv(config.out_dir + "/metrics_train_classifier.csv", metrics, config.hash());
    log_line(LogLevel::Info,
             "classifier leaf accuracy " + std::to_string(log.final_leaf_accuracy));
    return 0;
}

int cmd_train_scr(const RunConfig& config) {
    const SceneOnDisk disk = read_scene_dir(config.out_dir);
    SyntheticScene scene;
    scene.spec = config.scene_spec();
    scene.train = disk.train;
    scene.test = disk.test;

    const FrozenBackbone backbone(config.backbone_config());
    ClassifierHead head;
    const ClassifierHead* head_ptr = nullptr;
    if (config.scg.enabled) {
        head = load_classifier_head(head_path(config));
        head_ptr = &head;
    }

    const TrainResult result = train_scr(scene, backbone, head_ptr, config.train_config());

    RegressionHeadFile file;
    file.head = result.head;
    file.feature_dim = backbone.feature_dim();
    file.guidance_dim = config.scg.enabled ? config.scg.k1 : 0;
    save_regression_head(regressor_path(config), file);
    write_loss_history_csv(config.out_dir + "/loss_history.csv", result.loss_history,
                           config.hash());
    if (!result.rsd_audit.empty()) {
        write_rsd_audit_csv(config.out_dir + "/rsd_audit.csv", result.rsd_audit, config.hash());
    }

    MetricTable metrics;
    metrics.rows = {{"final_mean_loss", result.loss_history.back().mean_loss},
                    {"sample_evaluations", static_cast<double>(result.sample_evaluations)},
                    {"epochs", static_cast<double>(config.trainer.epochs)}};
    write_metrics_csv(config.out_dir + "/metrics_train_scr.csv", metrics, config.hash());
    log_line(LogLevel::Info, "regressor final mean loss " +
                                 std::to_string(result.loss_history.back().mean_loss));
    return 0;
}

int cmd_localize(const RunConfig& config, bool oracle) {
    const SceneOnDisk scene = read_scene_dir(config.out_dir);
    const RansacParams ransac = config.ransac_params();

    EvalResult result;
    if (oracle) {
        // Ground-truth coordinates injected in place of the regressor.
        std::vector<double> pos, ori;
        for (const TrainingSample& frame : scene.test) {
            FrameEval fe;
            fe.frame_id = frame.id;
            const RansacResult rr = localize(frame.world, frame.sensor, ransac);
            fe.solved = true;
            fe.error = pose_error(rr.pose, frame.gt_pose);
            fe.inlier_count = rr.inlier_count;
            result.frames.push_back(fe);
            pos.push_back(fe.error.position_m);
            ori.push_back(fe.error.orientation_deg);
        }
        if (!pos.empty()) {
            result.mean_position = std::accumulate(pos.begin(), pos.end(), 0.0) /
                                   static_cast<double>(pos.size());
            result.mean_orientation = std::accumulate(ori.begin(), ori.end(), 0.0) /
                                      static_cast<double>(ori.size());
            result.median_position = median(pos);
            result.median_orientation = median(ori);
        }
    } else {
        const FrozenBackbone backbone(config.backbone_config());
        const RegressionHeadFile file = load_regression_head(regressor_path(config));
        ClassifierHead head;
        const ClassifierHead* head_ptr = nullptr;
        if (file.guidance_dim > 0) {
            head = load_classifier_head(head_path(config));
            head_ptr = &head;
        }
        result = evaluate(file.head, backbone, head_ptr, scene.test, ransac);
    }

    std::ofstream per_frame(config.out_dir + "/localize_frames.csv");
    per_frame << "frame_id,solved,position_m,orientation_deg,inliers,config_hash\n";
    for (const FrameEval& fe : result.frames) {
        char buf[192];
        std::snprintf(buf, sizeof(buf), "%llu,%d,%.17g,%.17g,%zu,%s\n",
                      static_cast<unsigned long long>(fe.frame_id), fe.solved ? 1 : 0,
                      fe.error.position_m, fe.error.orientation_deg, fe.inlier_count,
                      config.hash().c_str());
        per_frame << buf;
    }

    MetricTable metrics;
    metrics.rows = {{"mean_position_m", result.mean_position},
                    {"median_position_m", result.median_position},
                    {"mean_orientation_deg", result.mean_orientation},
                    {"median_orientation_deg", result.median_orientation},
                    {"failures", static_cast<double>(result.failures)},
                    {"frames", static_cast<double>(result.frames.size())}};
    write_metrics_csv(config.out_dir + "/metrics_localize.csv", metrics, config.hash());
    log_line(LogLevel::Info, "median position error " + std::to_string(result.median_position) +
                                 " m over " + std::to_string(result.frames.size()) + " frames");
    return 0;
}

// Spearman rank correlation.
double rank_correlation(std::vector<double> a, std::vector<double> b) {
    auto ranks = [](std::vector<double> v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const std::vector<double> ra = ranks(std::move(a));
    const std::vector<double> rb = ranks(std::move(b));
    const double n = static_cast<double>(ra.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

int cmd_fuse(const RunConfig& config) {
    const SceneOnDisk scene = read_scene_dir(config.out_dir);
    const ClusterModel clusters = load_cluster_model(clusters_path(config));
    const ClassifierHead head = load_classifier_head(head_path(config));
    const FrozenBackbone backbone(config.backbone_config());

    // Ground truth: the train trajectory repeated for the configured laps.
    const std::size_t n = scene.train.size();
    std::vector<Vec3> gt;
    gt.reserve(n * static_cast<std::size_t>(config.fusion.laps) + 1);
    for (int lap = 0; lap < config.fusion.laps; ++lap) {
        for (std::size_t i = 0; i < n; ++i) gt.push_back(scene.train[i].gt_pose.translation);
    }
    gt.push_back(scene.train[0].gt_pose.translation);  // close the final loop

    DriftSpec drift;
    drift.bias_per_meter = Vec3(config.fusion.bias_x, config.fusion.bias_y, config.fusion.bias_z);
    drift.noise_sigma = config.fusion.noise_sigma;
    drift.process_sigma = config.fusion.process_sigma;
    const auto odometry =
        simulate_odometry(gt, drift, derive_seed(config.seed, "module.fusion"));

    // Classifier observations: argmax leaf center plus confidence, emitted at
    // the configured stride. Probabilities per frame are precomputed once and
    // reused across laps.
    std::vector<Observation> frame_obs(n);
    std::vector<double> frame_conf(n), frame_err(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto out = head.forward(backbone.global_feature(scene.train[i].sensor));
        Eigen::Index a1, a2;
        out.p1.row(0).maxCoeff(&a1);
        out.p2.row(0).maxCoeff(&a2);
        Observation obs;
        obs.position = leaf_center_3d(clusters, static_cast<int>(a1), static_cast<int>(a2));
        obs.confidence = confidence(out.p1.row(0).transpose(), out.p2.row(0).transpose());
        frame_obs[i] = obs;
        frame_conf[i] = obs.confidence;
        frame_err[i] = (obs.position - scene.train[i].gt_pose.translation).norm();
    }

    std::vector<std::optional<Observation>> observations(odometry.size());
    for (std::size_t step = 0; step < odometry.size(); ++step) {
        const std::size_t frame = (step + 1) % n;
        if (config.fusion.observation_stride > 0 &&
            step % static_cast<std::size_t>(config.fusion.observation_stride) == 0) {
            observations[step] = frame_obs[frame];
        }
    }

    const FusionReport report =
        run_fusion(gt, odometry, observations, config.fusion.noise_scale,
                   config.fusion.confidence_floor, config.fusion.initial_p);

    write_trajectory_csv(config.out_dir + "/trajectory_gt.csv", gt, config.hash());
    write_trajectory_csv(config.out_dir + "/trajectory_raw.csv", report.raw, config.hash());
    write_trajectory_csv(config.out_dir + "/trajectory_fused.csv", report.fused, config.hash());

    MetricTable metrics;
    metrics.rows = {{"raw_mean_error_m", report.raw_mean_error},
                    {"fused_mean_error_m", report.fused_mean_error},
                    {"raw_terminal_drift_m", report.raw_terminal_error},
                    {"improvement", report.improvement},
                    {"confidence_error_rank_corr", rank_correlation(frame_conf, frame_err)}};
    write_metrics_csv(config.out_dir + "/metrics_fuse.csv", metrics, config.hash());
    log_line(LogLevel::Info,
             "fusion improvement " + std::to_string(100.0 * report.improvement) + "%");
    return 0;
}

int cmd_report(const RunConfig& config) {
    aggregate_report(config.out_dir);
    log_line(LogLevel::Info, "report written to " + config.out_dir + "/report.txt");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiDAR scene-coordinate localization pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    bool oracle = false;

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic scene to the run dir");
    CLI::App* cluster = app.add_subcommand("cluster", "fit the two-level position clustering");
    CLI::App* train_cls =
        app.add_subcommand("train-classifier", "train the sample classification head");
    CLI::App* train_scr_cmd =
        app.add_subcommand("train-scr", "train the scene-coordinate regression head");
    CLI::App* loc = app.add_subcommand("localize", "evaluate test frames with RANSAC");
    loc->add_flag("--oracle", oracle, "inject ground-truth coordinates instead of the regressor");
    CLI::App* fuse = app.add_subcommand("fuse", "fuse drifting odometry with classifier fixes");
    CLI::App* report = app.add_subcommand("report", "aggregate metrics and render plots");
    for (CLI::App* cmd : {generate, cluster, train_cls, train_scr_cmd, loc, fuse, report}) {
        add_common(cmd, args);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const RunConfig config = resolve_config(args);
        if (generate->parsed()) return cmd_generate_forced(config, args.force);
        if (cluster->parsed()) return cmd_cluster(config);
        if (train_cls->parsed()) return cmd_train_classifier(config);
        if (train_scr_cmd->parsed()) return cmd_train_scr(config);
        if (loc->parsed()) return cmd_localize(config, oracle);
        if (fuse->parsed()) return cmd_fuse(config);
        if (report->parsed()) return cmd_report(config);
    } catch (const Error& e) {
        log_line(LogLevel::Error, e.what());
        return is_usage_error(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        log_line(LogLevel::Error, e.what());
        return 2;
    }
    return 0;
}
