#include "lightloc/pose_solver.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "lightloc/rng.hpp"

namespace lightloc {

namespace {

Pose fit_indices(const CorrespondenceSet& corrs, const std::vector<std::size_t>& idx) {
    Vec3 cs = Vec3::Zero();
    Vec3 cw = Vec3::Zero();
    for (std::size_t i : idx) {
        cs += corrs[i].sensor;
        cw += corrs[i].world;
    }
    const double n = static_cast<double>(idx.size());
    cs /= n;
    cw /= n;

    Mat3 h = Mat3::Zero();
    for (std::size_t i : idx) {
        h += (corrs[i].sensor - cs) * (corrs[i].world - cw).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    // Collinear inputs leave the rotation about the line unconstrained: the
    // two smallest singular values vanish together.
    if (sv(1) <= 1e-12 * sv(0)) {
        throw Error(ErrorCode::DegenerateGeometry, "correspondences are collinear");
    }

    Mat3 d = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) {
        d(2, 2) = -1.0;
    }
    Pose pose;
    pose.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    pose.translation = cw - pose.rotation * cs;
    return pose;
}

double residual(const Pose& pose, const Correspondence& c) {
    return (pose.rotation * c.sensor + pose.translation - c.world).norm();
}

struct Consensus {
    std::vector<bool> mask;
    std::size_t count = 0;
    double mean_residual = 0.0;
};

Consensus evaluate(const Pose& pose, const CorrespondenceSet& corrs, double threshold) {
    Consensus con;
    con.mask.assign(corrs.size(), false);
    double sum = 0.0;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        const double r = residual(pose, corrs[i]);
        if (r <= threshold) {
            con.mask[i] = true;
            ++con.count;
            sum += r;
        }
    }
    con.mean_residual = con.count > 0 ? sum / static_cast<double>(con.count) : 0.0;
    return con;
}

}  // namespace

Pose rigid_fit(const CorrespondenceSet& corrs) {
    if (corrs.size() < 3) {
        throw Error(ErrorCode::DegenerateGeometry,
                    "need at least 3 correspondences, got " + std::to_string(corrs.size()));
    }
    for (const Correspondence& c : corrs) {
        if (!c.sensor.allFinite() || !c.world.allFinite()) {
            throw Error(ErrorCode::DegenerateGeometry, "non-finite correspondence");
        }
    }
    std::vector<std::size_t> all(corrs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return fit_indices(corrs, all);
}

RansacResult ransac_pose(const CorrespondenceSet& corrs, const RansacParams& params) {
    if (corrs.size() < 3) {
        throw Error(ErrorCode::NoConsensus,
                    "need at least 3 correspondences, got " + std::to_string(corrs.size()));
    }
    if (params.max_iterations < 1 || params.inlier_threshold <= 0.0) {
        throw Error(ErrorCode::InvalidConfig, "max_iterations >= 1 and inlier_threshold > 0 required");
    }

    Rng rng(params.seed);
    bool have_best = false;
    Pose best_pose;
    Consensus best;

    for (int iter = 0; iter < params.max_iterations; ++iter) {
        const std::vector<std::size_t> sample = rng.sample_without_replacement(corrs.size(), 3);
        Pose hyp;
        try {
            hyp = fit_indices(corrs, sample);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DegenerateGeometry) continue;  // burn the iteration
            throw;
        }
        Consensus con = evaluate(hyp, corrs, params.inlier_threshold);
        if (con.count < 3) continue;
        const bool better =
            !have_best || con.count > best.count ||
            (con.count == best.count && con.mean_residual < best.mean_residual);
        if (better) {
            have_best = true;
            best_pose = hyp;
            best = std::move(con);
        }
    }

    const double frac = have_best
                            ? static_cast<double>(best.count) / static_cast<double>(corrs.size())
                            : 0.0;
    if (!have_best || frac < params.min_inlier_fraction) {
        throw Error(ErrorCode::NoConsensus,
                    "best inlier fraction " + std::to_string(frac) + " below minimum " +
                        std::to_string(params.min_inlier_fraction));
    }

    if (params.refit_on_inliers) {
        std::vector<std::size_t> idx;
        idx.reserve(best.count);
        for (std::size_t i = 0; i < corrs.size(); ++i) {
            if (best.mask[i]) idx.push_back(i);
        }
        try {
            best_pose = fit_indices(corrs, idx);
            // Mask is recomputed so every flagged inlier is within threshold
            // under the pose actually returned.
            best = evaluate(best_pose, corrs, params.inlier_threshold);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateGeometry) throw;
            // Keep the minimal-sample pose if the inlier set degenerated.
        }
    }

    RansacResult result;
    result.pose = best_pose;
    result.inlier_mask = best.mask;
    result.inlier_count = best.count;
    result.mean_inlier_residual = best.mean_residual;

    std::vector<double> inlier_res;
    inlier_res.reserve(best.count);
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        if (result.inlier_mask[i]) inlier_res.push_back(residual(result.pose, corrs[i]));
    }
    if (!inlier_res.empty()) {
        std::sort(inlier_res.begin(), inlier_res.end());
        const std::size_t m = inlier_res.size();
        result.median_inlier_residual =
            (m % 2 == 1) ? inlier_res[m / 2] : 0.5 * (inlier_res[m / 2 - 1] + inlier_res[m / 2]);
    }
    return result;
}

RansacResult localize(const PointCloud& predicted_world, const PointCloud& sensor_points,
                      const RansacParams& params) {
    if (predicted_world.size() != sensor_points.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    "predicted " + std::to_string(predicted_world.size()) + " vs sensor " +
                        std::to_string(sensor_points.size()));
    }
    if (sensor_points.frame != Frame::Sensor) {
        throw Error(ErrorCode::WrongFrame, "localize expects sensor-frame input points");
    }
    CorrespondenceSet corrs(sensor_points.size());
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        corrs[i].sensor = sensor_points.points[i];
        corrs[i].world = predicted_world.points[i];
    }
    return ransac_pose(corrs, params);
}

}  // namespace lightloc
