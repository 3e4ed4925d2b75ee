#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lightloc/geometry.hpp"
#include "lightloc/mlp.hpp"
#include "lightloc/rng.hpp"

namespace lightloc::testing {

inline Pose random_pose(Rng& rng, double translation_scale = 10.0) {
    const Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    Pose pose;
    pose.rotation = q.normalized().toRotationMatrix();
    pose.translation =
        Vec3(rng.normal(0.0, translation_scale), rng.normal(0.0, translation_scale),
             rng.normal(0.0, translation_scale));
    return pose;
}

inline PointCloud random_cloud(Rng& rng, std::size_t n, double scale = 10.0) {
    PointCloud cloud;
    cloud.frame = Frame::Sensor;
    for (std::size_t i = 0; i < n; ++i) {
        cloud.points.emplace_back(rng.normal(0.0, scale), rng.normal(0.0, scale),
                                  rng.normal(0.0, scale));
    }
    return cloud;
}

// Central finite difference of a scalar function with respect to one entry of
// a parameter matrix.
inline double central_difference(std::function<double()> eval, double& param, double step) {
    const double saved = param;
    param = saved + step;
    const double hi = eval();
    param = saved - step;
    const double lo = eval();
    param = saved;
    return (hi - lo) / (2.0 * step);
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    int checked = 0;
};

// Compares every parameter gradient of `grads` against central differences of
// `eval` (which must recompute the loss from the current parameters).
// Relative error uses max(|analytic|, |numeric|, floor) as denominator.
inline GradCheckResult check_mlp_gradients(Mlp& mlp, const MlpGradients& grads,
                                           std::function<double()> eval, double step = 1e-3,
                                           double floor = 1e-4) {
    GradCheckResult result;
    auto record = [&](double analytic, double numeric) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
        ++result.checked;
    };
    for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
        auto& layer = mlp.layers()[l];
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                record(grads.weight[l](r, c), central_difference(eval, layer.weight(r, c), step));
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            record(grads.bias[l](r), central_difference(eval, layer.bias(r), step));
        }
    }
    return result;
}

}  // namespace lightloc::testing
