#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lightloc/error.hpp"

namespace lightloc {

// One K-Means level: centers are k x d, row per cluster.
struct KmeansResult {
    Eigen::MatrixXd centers;
    std::vector<int> assignments;
    std::vector<double> inertia_history;  // one entry per Lloyd iteration
    bool converged = false;

    double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

// Lloyd's algorithm with k-means++ seeding. Deterministic given seed. Empty
// clusters are re-seeded from the point farthest from its assigned center.
// Throws TooFewSamples when positions.rows() < k.
KmeansResult kmeans(const Eigen::MatrixXd& positions, int k, std::uint64_t seed,
                    int max_iters = 100);

// Two-level position clustering: k1 top-level clusters, then k2 clusters fit
// independently inside each. Leaf i1*k2 + i2 is level-2 cluster i2 of
// level-1 cluster i1.
struct ClusterModel {
    int k1 = 0;
    int k2 = 0;
    int dims = 0;
    Eigen::MatrixXd level1_centers;               // k1 x d
    std::vector<Eigen::MatrixXd> level2_centers;  // k1 entries of k2 x d

    int assign_level1(const Eigen::VectorXd& position) const;
    int assign_level2(int level1, const Eigen::VectorXd& position) const;

    Eigen::VectorXd leaf_center(int level1, int level2) const;
    // All k1*k2 leaf centers, row i1*k2+i2.
    Eigen::MatrixXd flat_leaf_centers() const;
};

struct HierarchicalLabels {
    ClusterModel model;
    std::vector<int> level1;  // per sample
    std::vector<int> level2;  // per sample, index within its level-1 cluster
};

// Throws TooFewSamples if any level-1 cluster holds fewer than k2 members.
HierarchicalLabels build_hierarchical_labels(const Eigen::MatrixXd& positions, int k1, int k2,
                                             std::uint64_t seed, int max_iters = 100);

// Versioned binary serialization (magic "LLCM", version u16, dims, then
// little-endian f64 centers).
void save_cluster_model(const std::string& path, const ClusterModel& model);
ClusterModel load_cluster_model(const std::string& path);

}  // namespace lightloc
