#include "lightloc/fusion.hpp"

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>

#include "lightloc/rng.hpp"

namespace lightloc {

KalmanState kf_predict(const KalmanState& state, const OdometryStep& step) {
    KalmanState prior;
    prior.mean = state.mean + step.delta;
    prior.covariance = state.covariance + step.process_noise;
    prior.covariance = 0.5 * (prior.covariance + prior.covariance.transpose());
    return prior;
}

KalmanState kf_update(const KalmanState& prior, const Observation& obs, double noise_scale) {
    if (obs.confidence < 0.0 || obs.confidence > 1.0) {
        throw Error(ErrorCode::InvalidConfig, "confidence must lie in [0, 1]");
    }
    const Mat3 v = Mat3::Identity() * ((1.0 - obs.confidence) * noise_scale);
    const Mat3 innovation = v + prior.covariance;

    Eigen::JacobiSVD<Mat3> svd(innovation);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(2);
    if (smin <= 0.0 || smax / smin > 1e12) {
        throw Error(ErrorCode::SingularInnovation, "V + P is numerically singular");
    }

    const Mat3 gain = prior.covariance * innovation.inverse();
    KalmanState posterior;
    posterior.mean = prior.mean + gain * (obs.position - prior.mean);
    posterior.covariance = (Mat3::Identity() - gain) * prior.covariance;
    posterior.covariance = 0.5 * (posterior.covariance + posterior.covariance.transpose());
    return posterior;
}

std::vector<OdometryStep> simulate_odometry(const std::vector<Vec3>& gt_positions,
                                            const DriftSpec& drift, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "odometry"));
    std::vector<OdometryStep> steps;
    if (gt_positions.size() < 2) return steps;
    steps.reserve(gt_positions.size() - 1);
    for (std::size_t i = 1; i < gt_positions.size(); ++i) {
        const Vec3 true_delta = gt_positions[i] - gt_positions[i - 1];
        const double len = true_delta.norm();
        OdometryStep step;
        step.delta = true_delta + drift.bias_per_meter * len;
        if (drift.noise_sigma > 0.0) {
            step.delta += Vec3(rng.normal(0.0, drift.noise_sigma),
                               rng.normal(0.0, drift.noise_sigma),
                               rng.normal(0.0, drift.noise_sigma));
        }
        step.process_noise = Mat3::Identity() * (drift.process_sigma * drift.process_sigma * len);
        steps.push_back(step);
    }
    return steps;
}

FusionReport run_fusion(const std::vector<Vec3>& gt_positions,
                        const std::vector<OdometryStep>& odometry,
                        const std::vector<std::optional<Observation>>& observations,
                        double noise_scale, double confidence_floor, double initial_p) {
    if (gt_positions.size() != odometry.size() + 1) {
        throw Error(ErrorCode::LengthMismatch, "need one odometry step per trajectory segment");
    }
    if (!observations.empty() && observations.size() != odometry.size()) {
        throw Error(ErrorCode::LengthMismatch, "observations must align with odometry steps");
    }

    FusionReport report;
    KalmanState state;
    state.mean = gt_positions.front();
    state.covariance = Mat3::Identity() * initial_p;

    Vec3 raw = gt_positions.front();
    report.raw.push_back(raw);
    report.fused.push_back(state.mean);

    double raw_sum = 0.0;
    double fused_sum = 0.0;
    for (std::size_t i = 0; i < odometry.size(); ++i) {
        raw += odometry[i].delta;
        report.raw.push_back(raw);

        state = kf_predict(state, odometry[i]);
        if (!observations.empty() && observations[i].has_value() &&
            observations[i]->confidence >= confidence_floor) {
            state = kf_update(state, *observations[i], noise_scale);
        }
        report.fused.push_back(state.mean);

        raw_sum += (raw - gt_positions[i + 1]).norm();
        fused_sum += (state.mean - gt_positions[i + 1]).norm();
    }
    const double n = static_cast<double>(odometry.size());
    report.raw_mean_error = n > 0 ? raw_sum / n : 0.0;
    report.fused_mean_error = n > 0 ? fused_sum / n : 0.0;
    report.raw_terminal_error = (report.raw.back() - gt_positions.back()).norm();
    report.improvement =
        report.raw_mean_error > 0.0 ? 1.0 - report.fused_mean_error / report.raw_mean_error : 0.0;
    return report;
}

void write_trajectory_csv(const std::string& path, const std::vector<Vec3>& positions,
                          const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "t,x,y,z,config_hash\n";
    char buf[192];
    for (std::size_t i = 0; i < positions.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%s\n", i, positions[i].x(),
                      positions[i].y(), positions[i].z(), config_hash.c_str());
        out << buf;
    }
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace lightloc
