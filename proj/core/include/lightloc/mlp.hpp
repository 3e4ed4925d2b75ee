#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "lightloc/error.hpp"

namespace lightloc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { ReLU, Identity };

struct MlpLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::ReLU;
};

// Residual connection: post-activation output of layer `from` is added to the
// pre-activation of layer `to` (widths must match). `from` may be -1 for the
// network input.
struct SkipLink {
    int from = -1;
    int to = 0;
};

// Per-layer parameter gradients, same shapes as the layers.
struct MlpGradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;
};

// Activations cached by forward() for the backward pass. outputs[0] is the
// input batch; outputs[i] is layer i-1's post-activation output.
struct MlpTrace {
    std::vector<Matrix> outputs;
    std::vector<Matrix> pre_activations;
};

// Small fully connected network with explicit analytic backward. Batches are
// row-major: one sample per row.
class Mlp {
public:
    Mlp() = default;

    // widths = {input, hidden..., output}; hidden layers get `hidden_act`, the
    // final layer is linear. He-scaled init, deterministic given seed.
    static Mlp make(const std::vector<int>& widths, std::uint64_t seed,
                    const std::vector<SkipLink>& skips = {},
                    Activation hidden_act = Activation::ReLU);

    static Mlp from_parts(std::vector<MlpLayer> layers, std::vector<SkipLink> skips);

    int input_width() const;
    int output_width() const;
    std::size_t layer_count() const { return layers_.size(); }
    std::size_t parameter_count() const;

    const std::vector<MlpLayer>& layers() const { return layers_; }
    std::vector<MlpLayer>& layers() { return layers_; }
    const std::vector<SkipLink>& skip_links() const { return skips_; }

    Matrix forward(const Matrix& input) const;
    Matrix forward(const Matrix& input, MlpTrace& trace) const;

    // Analytic gradients of the forward map. Returns the input gradient and
    // fills `grads`. ReLU uses subgradient 0 at exactly zero pre-activation.
    Matrix backward(const MlpTrace& trace, const Matrix& output_grad, MlpGradients& grads) const;

    MlpGradients zero_gradients() const;

    void validate() const;

private:
    std::vector<MlpLayer> layers_;
    std::vector<SkipLink> skips_;
};

// Plain gradient descent with decoupled weight decay:
//   theta <- theta * (1 - lr * weight_decay) - lr * grad
// The Adam variant keeps per-parameter moment estimates behind the same
// update call.
class Optimizer {
public:
    enum class Kind { Gd, Adam };

    Optimizer(Kind kind, double weight_decay) : kind_(kind), weight_decay_(weight_decay) {}

    void step(Mlp& mlp, const MlpGradients& grads, double lr);

    Kind kind() const { return kind_; }

private:
    Kind kind_;
    double weight_decay_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long step_count_ = 0;
    std::vector<Matrix> m_w_, v_w_;
    std::vector<Vector> m_b_, v_b_;
};

// One-cycle learning rate: linear warmup from lr_min to lr_max over the first
// 30% of training, then cosine decay back to lr_min.
double one_cycle_lr(double lr_min, double lr_max, double progress, double warmup_fraction = 0.3);

class BinaryWriter;
class BinaryReader;
void write_mlp(BinaryWriter& w, const Mlp& mlp);
Mlp read_mlp(BinaryReader& r);

}  // namespace lightloc
