#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lightloc/geometry.hpp"

namespace lightloc {

// Position-only filter state.
struct KalmanState {
    Vec3 mean = Vec3::Zero();
    Mat3 covariance = Mat3::Zero();
};

// Relative motion reported by the odometry source for one step.
struct OdometryStep {
    Vec3 delta = Vec3::Zero();
    Mat3 process_noise = Mat3::Zero();  // W_t, symmetric PSD
};

// Cluster-center position observation with classifier confidence. The
// measurement noise is V_t = I * (1 - c), optionally scaled.
struct Observation {
    Vec3 position = Vec3::Zero();
    double confidence = 0.0;  // in [0, 1]
};

// Prior: x_hat = x + delta, P_hat = P + W (identity transition; the odometry
// translation enters as additive control).
KalmanState kf_predict(const KalmanState& state, const OdometryStep& step);

// Posterior: K = P_hat (V + P_hat)^-1, x = x_hat + K (z - x_hat),
// P = (I - K) P_hat, symmetrized. Throws SingularInnovation when V + P_hat is
// numerically singular (condition number above 1e12).
KalmanState kf_update(const KalmanState& prior, const Observation& obs,
                      double noise_scale = 1.0);

struct DriftSpec {
    Vec3 bias_per_meter = Vec3::Zero();  // systematic drift direction
    double noise_sigma = 0.0;            // per-step Gaussian noise, per axis
    double process_sigma = 0.1;          // filter W_t = sigma^2 * |delta| * I
};

// Converts ground-truth positions into drifting relative-motion steps:
// delta_i = true_delta + bias * |true_delta| + N(0, sigma^2). Deterministic
// given seed.
std::vector<OdometryStep> simulate_odometry(const std::vector<Vec3>& gt_positions,
                                            const DriftSpec& drift, std::uint64_t seed);

struct FusionReport {
    std::vector<Vec3> raw;    // integrated odometry
    std::vector<Vec3> fused;  // filter posterior means
    double raw_mean_error = 0.0;
    double fused_mean_error = 0.0;
    double raw_terminal_error = 0.0;
    double improvement = 0.0;  // 1 - fused/raw
};

// Alternates predict/update along the trajectory. observations[i] (when
// present) corrects the state after step i. The state starts at the first
// ground-truth position with covariance initial_p * I.
FusionReport run_fusion(const std::vector<Vec3>& gt_positions,
                        const std::vector<OdometryStep>& odometry,
                        const std::vector<std::optional<Observation>>& observations,
                        double noise_scale = 1.0, double confidence_floor = 0.0,
                        double initial_p = 1e-2);

void write_trajectory_csv(const std::string& path, const std::vector<Vec3>& positions,
                          const std::string& config_hash);

}  // namespace lightloc
