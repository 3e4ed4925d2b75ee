#include "lightloc/clustering.hpp"

#include <algorithm>
#include <limits>

#include "lightloc/rng.hpp"
#include "lightloc/serial.hpp"

namespace lightloc {

namespace {

double sq_dist(const Eigen::MatrixXd& pts, Eigen::Index i, const Eigen::MatrixXd& centers,
               Eigen::Index c) {
    return (pts.row(i) - centers.row(c)).squaredNorm();
}

// k-means++: first center uniform, subsequent centers drawn proportionally to
// squared distance from the nearest chosen center.
Eigen::MatrixXd seed_centers(const Eigen::MatrixXd& pts, int k, Rng& rng) {
    const Eigen::Index n = pts.rows();
    Eigen::MatrixXd centers(k, pts.cols());
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);

    Eigen::Index first = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    centers.row(0) = pts.row(first);
    chosen[static_cast<std::size_t>(first)] = true;

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = sq_dist(pts, i, centers, c - 1);
            if (d < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = d;
            total += d2[static_cast<std::size_t>(i)];
        }
        Eigen::Index pick = -1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[static_cast<std::size_t>(i)];
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = n - 1;
        }
        if (pick < 0 || chosen[static_cast<std::size_t>(pick)]) {
            // All remaining mass is on duplicates; fall back to the first
            // unchosen point so k distinct rows are still selected.
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            }
        }
        centers.row(c) = pts.row(pick);
        chosen[static_cast<std::size_t>(pick)] = true;
    }
    return centers;
}

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::VectorXd& p) {
    int best = 0;
    double best_d = (centers.row(0).transpose() - p).squaredNorm();
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
        const double d = (centers.row(c).transpose() - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

KmeansResult kmeans(const Eigen::MatrixXd& positions, int k, std::uint64_t seed, int max_iters) {
    const Eigen::Index n = positions.rows();
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
    if (n < k) {
        throw Error(ErrorCode::TooFewSamples,
                    std::to_string(n) + " positions for k=" + std::to_string(k));
    }

    Rng rng(seed);
    KmeansResult result;
    result.centers = seed_centers(positions, k, rng);
    result.assignments.assign(static_cast<std::size_t>(n), -1);

    std::vector<double> nearest_d2(static_cast<std::size_t>(n), 0.0);
    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment step.
        bool changed = false;
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(positions, i, result.centers, 0);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(positions, i, result.centers, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            nearest_d2[static_cast<std::size_t>(i)] = best_d;
            inertia += best_d;
            if (result.assignments[static_cast<std::size_t>(i)] != best) {
                result.assignments[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        result.inertia_history.push_back(inertia);
        if (!changed) {
            result.converged = true;
            break;
        }

        // Update step.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, positions.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(result.assignments[static_cast<std::size_t>(i)]) += positions.row(i);
            ++counts[static_cast<std::size_t>(result.assignments[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                result.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            } else {
                // Re-seed an empty cluster from the farthest point.
                Eigen::Index far = 0;
                for (Eigen::Index i = 1; i < n; ++i) {
                    if (nearest_d2[static_cast<std::size_t>(i)] >
                        nearest_d2[static_cast<std::size_t>(far)]) {
                        far = i;
                    }
                }
                result.centers.row(c) = positions.row(far);
                nearest_d2[static_cast<std::size_t>(far)] = 0.0;
            }
        }
    }

    // Final assignment pass so stored labels are nearest-center consistent
    // even when the loop stopped at max_iters after a center update.
    if (!result.converged) {
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int best = nearest_center(result.centers, positions.row(i).transpose());
            result.assignments[static_cast<std::size_t>(i)] = best;
            inertia += sq_dist(positions, i, result.centers, best);
        }
        result.inertia_history.push_back(inertia);
    }
    return result;
}

int ClusterModel::assign_level1(const Eigen::VectorXd& position) const {
    return nearest_center(level1_centers, position);
}

int ClusterModel::assign_level2(int level1, const Eigen::VectorXd& position) const {
    return nearest_center(level2_centers[static_cast<std::size_t>(level1)], position);
}

Eigen::VectorXd ClusterModel::leaf_center(int level1, int level2) const {
    return level2_centers[static_cast<std::size_t>(level1)].row(level2).transpose();
}

Eigen::MatrixXd ClusterModel::flat_leaf_centers() const {
    Eigen::MatrixXd flat(k1 * k2, dims);
    for (int i1 = 0; i1 < k1; ++i1) {
        flat.block(i1 * k2, 0, k2, dims) = level2_centers[static_cast<std::size_t>(i1)];
    }
    return flat;
}

HierarchicalLabels build_hierarchical_labels(const Eigen::MatrixXd& positions, int k1, int k2,
                                             std::uint64_t seed, int max_iters) {
    HierarchicalLabels out;
    const KmeansResult level1 = kmeans(positions, k1, derive_seed(seed, "kmeans.level1"), max_iters);

    out.model.k1 = k1;
    out.model.k2 = k2;
    out.model.dims = static_cast<int>(positions.cols());
    out.model.level1_centers = level1.centers;
    out.model.level2_centers.resize(static_cast<std::size_t>(k1));
    out.level1 = level1.assignments;
    out.level2.assign(static_cast<std::size_t>(positions.rows()), -1);

    for (int c = 0; c < k1; ++c) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < positions.rows(); ++i) {
            if (level1.assignments[static_cast<std::size_t>(i)] == c) members.push_back(i);
        }
        if (static_cast<int>(members.size()) < k2) {
            throw Error(ErrorCode::TooFewSamples,
                        "level-1 cluster " + std::to_string(c) + " has " +
                            std::to_string(members.size()) + " members, need >= " +
                            std::to_string(k2));
        }
        Eigen::MatrixXd sub(members.size(), positions.cols());
        for (std::size_t i = 0; i < members.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = positions.row(members[i]);
        const KmeansResult level2 =
            kmeans(sub, k2, derive_seed(seed, "kmeans.level2", static_cast<std::uint64_t>(c)),
                   max_iters);
        out.model.level2_centers[static_cast<std::size_t>(c)] = level2.centers;
        for (std::size_t i = 0; i < members.size(); ++i) {
            out.level2[static_cast<std::size_t>(members[i])] = level2.assignments[i];
        }
    }
    return out;
}

namespace {
constexpr char kClusterMagic[4] = {'L', 'L', 'C', 'M'};
constexpr std::uint16_t kClusterVersion = 1;
}  // namespace

void save_cluster_model(const std::string& path, const ClusterModel& model) {
    BinaryWriter w(path);
    w.magic(kClusterMagic);
    w.u16(kClusterVersion);
    w.u32(static_cast<std::uint32_t>(model.k1));
    w.u32(static_cast<std::uint32_t>(model.k2));
    w.u32(static_cast<std::uint32_t>(model.dims));
    w.matrix(model.level1_centers);
    for (const Eigen::MatrixXd& m : model.level2_centers) w.matrix(m);
    w.close();
}

ClusterModel load_cluster_model(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kClusterMagic);
    r.expect_version(kClusterVersion);
    ClusterModel model;
    model.k1 = static_cast<int>(r.u32());
    model.k2 = static_cast<int>(r.u32());
    model.dims = static_cast<int>(r.u32());
    model.level1_centers = r.matrix();
    model.level2_centers.resize(static_cast<std::size_t>(model.k1));
    for (int i = 0; i < model.k1; ++i) model.level2_centers[static_cast<std::size_t>(i)] = r.matrix();
    return model;
}

}  // namespace lightloc
