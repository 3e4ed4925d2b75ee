#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lightloc/mlp.hpp"
#include "lightloc/rng.hpp"

namespace lightloc {

// Probability vectors are plain Eigen vectors; this checks the contract
// (entries >= 0, sum == 1 within 1e-9).
bool is_probability_vector(const Vector& v, double tol = 1e-9);

// Label-smoothed cross entropy over a predicted probability vector:
//   L = -sum_i (onehot_i * (1 - eps) + eps / k) * log(max(pred_i, 1e-12))
double smoothed_ce(const Vector& pred, int label, double epsilon);

Vector softmax(const Vector& logits);
Matrix softmax_rows(const Matrix& logits);

// Product of the two levels' argmax probabilities.
double confidence(const Vector& p1, const Vector& p2);

// Normalize to the unit sphere, add elementwise Gaussian noise of the given
// std deviation, renormalize. Training uses sigma > 0; inference sigma = 0.
// If the noised vector degenerates (norm < 1e-12) one resample is attempted
// before throwing ZeroVector.
Vector guidance_feature(const Vector& p1, double sigma, Rng& rng);

struct ClassifierConfig {
    int input_dim = 0;
    int k1 = 25;
    int k2 = 100;
    std::vector<int> level1_hidden = {64};
    std::vector<int> level2_hidden = {64};
    double epsilon = 0.1;  // label smoothing
    int epochs = 50;
    int batch_size = 512;
    double lr_min = 5e-4;
    double lr_max = 5e-3;
    double weight_decay = 1e-2;
    Optimizer::Kind optimizer = Optimizer::Kind::Adam;
    std::uint64_t seed = 0;
};

// Two-level sample classification head. Level 1 predicts the coarse position
// cluster; its probability vector modulates the shared feature (elementwise
// scale plus shift, both linear in p1) before the level-2 MLP refines within
// the cluster.
class ClassifierHead {
public:
    ClassifierHead() = default;
    static ClassifierHead make(const ClassifierConfig& config);

    struct Output {
        Matrix p1;  // batch x k1
        Matrix p2;  // batch x k2
    };

    Output forward(const Matrix& features) const;
    // Single-sample convenience.
    Output forward(const Vector& feature) const;

    struct Batch {
        Matrix features;            // n x input_dim
        std::vector<int> level1;    // n labels
        std::vector<int> level2;    // n labels
    };

    // Mean smoothed CE over the batch, summed across the two levels, with
    // analytic gradients for every parameter (both MLPs and the modulation
    // maps). Gradient of the loss with respect to the input features is
    // returned for gradient checking.
    struct BackwardResult {
        double loss = 0.0;
        double loss_level1 = 0.0;
        double loss_level2 = 0.0;
        MlpGradients level1_grads;
        MlpGradients level2_grads;
        Matrix scale_map_grad;
        Matrix shift_map_grad;
        Matrix input_grad;
    };
    BackwardResult backward(const Batch& batch, double epsilon) const;

    void apply_update(const BackwardResult& grads, double lr);

    int k1() const { return static_cast<int>(scale_map_.cols()); }
    int k2() const { return level2_.output_width(); }
    int input_dim() const { return level1_.input_width(); }

    // Input whitening applied by forward/backward before both MLP levels and
    // the modulation. Fit from the training cache.
    void set_input_normalization(const Vector& mean, const Vector& inv_scale);

    const Mlp& level1_mlp() const { return level1_; }
    const Mlp& level2_mlp() const { return level2_; }
    const Matrix& scale_map() const { return scale_map_; }
    const Matrix& shift_map() const { return shift_map_; }
    Mlp& level1_mlp() { return level1_; }
    Mlp& level2_mlp() { return level2_; }
    Matrix& scale_map() { return scale_map_; }
    Matrix& shift_map() { return shift_map_; }

private:
    Matrix normalize(const Matrix& features) const;

    Mlp level1_;
    Mlp level2_;
    Matrix scale_map_;  // input_dim x k1
    Matrix shift_map_;  // input_dim x k1
    Vector input_mean_;
    Vector input_inv_scale_;

    friend void save_classifier_head(const std::string&, const ClassifierHead&);
    friend ClassifierHead load_classifier_head(const std::string&);
};

struct ClassifierTrainLog {
    std::vector<double> epoch_loss;
    double final_leaf_accuracy = 0.0;
};

// Trains on a fixed feature cache: fills once, then iterates epochs over the
// shuffled cache. Optimizes the summed two-level loss. Deterministic given
// config.seed; epochs = 0 returns the freshly initialized head.
ClassifierHead train_classifier(const ClassifierHead::Batch& cache, const ClassifierConfig& config,
                                ClassifierTrainLog* log = nullptr);

// Fraction of samples whose (level1, level2) argmax pair matches the labels.
double leaf_accuracy(const ClassifierHead& head, const ClassifierHead::Batch& data);

// Versioned binary serialization (magic "LLCH").
void save_classifier_head(const std::string& path, const ClassifierHead& head);
ClassifierHead load_classifier_head(const std::string& path);

}  // namespace lightloc
