#pragma once

#include <cstdint>
#include <vector>

#include "lightloc/geometry.hpp"

namespace lightloc {

// Matched (sensor, world) point pair produced by the regressor.
struct Correspondence {
    Vec3 sensor;
    Vec3 world;
};

using CorrespondenceSet = std::vector<Correspondence>;

struct RansacParams {
    int max_iterations = 1024;
    double inlier_threshold = 0.25;  // meters; matches the 0.25 voxel size default
    double min_inlier_fraction = 0.1;
    std::uint64_t seed = 0;
    bool refit_on_inliers = true;
};

struct RansacResult {
    Pose pose;
    std::vector<bool> inlier_mask;
    std::size_t inlier_count = 0;
    double mean_inlier_residual = 0.0;
    double median_inlier_residual = 0.0;
};

// Least-squares rigid transform mapping sensor points onto world points
// (centroid alignment + SVD of the cross-covariance, det(R) = +1 enforced).
// Throws DegenerateGeometry when the pairs are collinear.
Pose rigid_fit(const CorrespondenceSet& corrs);

// Best 3-point hypothesis by inlier count, ties broken by lower mean inlier
// residual. Deterministic given params.seed. Throws NoConsensus when the best
// inlier fraction is below params.min_inlier_fraction.
RansacResult ransac_pose(const CorrespondenceSet& corrs, const RansacParams& params);

// Zips predicted world coordinates with their sensor points and solves.
// Throws LengthMismatch when the clouds differ in size.
RansacResult localize(const PointCloud& predicted_world, const PointCloud& sensor_points,
                      const RansacParams& params);

}  // namespace lightloc
