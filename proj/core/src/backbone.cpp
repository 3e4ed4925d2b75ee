#include "lightloc/backbone.hpp"

#include <cmath>

#include "lightloc/rng.hpp"

namespace lightloc {

namespace {

Matrix random_directions(int rows, double length_scale, Rng& rng) {
    Matrix m(rows, 3);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = rng.normal() / length_scale;
    }
    return m;
}

// Log-spaced spread of scales around the base length scale (base/3 .. 3*base)
// so the bank resolves both coarse placement and fine offsets.
Matrix multiscale_directions(int rows, double base_scale, Rng& rng) {
    Matrix m(rows, 3);
    for (int r = 0; r < rows; ++r) {
        const double t = rows > 1 ? static_cast<double>(r) / static_cast<double>(rows - 1) : 0.5;
        const double scale = base_scale * std::exp((2.0 * t - 1.0) * std::log(3.0));
        for (int c = 0; c < 3; ++c) m(r, c) = rng.normal() / scale;
    }
    return m;
}

Vector random_phases(int n, Rng& rng) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(0.0, 2.0 * M_PI);
    return v;
}

}  // namespace

FrozenBackbone::FrozenBackbone(const BackboneConfig& config) : config_(config) {
    if (config.point_features < 1 || config.context_features < 1 || config.joint_features < 0) {
        throw Error(ErrorCode::InvalidConfig, "backbone bank sizes must be positive");
    }
    Rng rng(derive_seed(config.seed, "backbone"));
    point_dirs_ = random_directions(config.point_features, config.point_length_scale, rng);
    point_phase_ = random_phases(config.point_features, rng);
    context_dirs_ = multiscale_directions(config.context_features, config.context_length_scale, rng);
    context_phase_ = random_phases(config.context_features, rng);

    projection_.resize(config.point_features, config.point_features);
    const double scale = std::sqrt(2.0 / static_cast<double>(config.point_features));
    for (int r = 0; r < config.point_features; ++r) {
        for (int c = 0; c < config.point_features; ++c) projection_(r, c) = scale * rng.normal();
    }

    joint_point_dirs_ = random_directions(config.joint_features, config.point_length_scale, rng);
    joint_context_dirs_.resize(config.joint_features, config.context_features);
    const double gain = config.joint_context_gain /
                        std::sqrt(static_cast<double>(config.context_features));
    for (int r = 0; r < config.joint_features; ++r) {
        for (int c = 0; c < config.context_features; ++c) {
            joint_context_dirs_(r, c) = gain * rng.normal();
        }
    }
    joint_phase_ = random_phases(config.joint_features, rng);
}

Matrix FrozenBackbone::dense_features(const PointCloud& sensor_cloud) const {
    if (sensor_cloud.frame != Frame::Sensor) {
        throw Error(ErrorCode::WrongFrame, "backbone expects sensor-frame clouds");
    }
    if (sensor_cloud.empty()) {
        throw Error(ErrorCode::InvalidSpec, "backbone given an empty cloud");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(sensor_cloud.size());
    Matrix pts(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) pts.row(i) = sensor_cloud.points[static_cast<std::size_t>(i)].transpose();

    Matrix psi = (pts * point_dirs_.transpose()).rowwise() + point_phase_.transpose();
    psi = psi.array().cos().matrix();

    // Mean-pooled characteristic-function bank: max would saturate once a
    // frequency wraps across the cloud extent.
    Matrix chi = (pts * context_dirs_.transpose()).rowwise() + context_phase_.transpose();
    chi = chi.array().cos().matrix();
    const Eigen::RowVectorXd context = chi.colwise().mean();

    Matrix joint = (pts * joint_point_dirs_.transpose()).rowwise() +
                   (joint_phase_ + joint_context_dirs_ * context.transpose()).transpose();
    joint = joint.array().cos().matrix();

    Matrix out(n, feature_dim());
    Eigen::Index col = 0;
    out.middleCols(col, config_.point_features) = psi * projection_.transpose();
    col += config_.point_features;
    out.middleCols(col, 3) = pts;
    col += 3;
    out.middleCols(col, config_.context_features) = context.replicate(n, 1);
    col += config_.context_features;
    out.middleCols(col, config_.joint_features) = joint;
    return out;
}

Vector FrozenBackbone::global_feature(const Matrix& dense) const {
    return dense.colwise().maxCoeff().transpose();
}

Vector FrozenBackbone::global_feature(const PointCloud& sensor_cloud) const {
    return global_feature(dense_features(sensor_cloud));
}

}  // namespace lightloc
