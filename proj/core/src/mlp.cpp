#include "lightloc/mlp.hpp"

#include <cmath>

#include "lightloc/rng.hpp"
#include "lightloc/serial.hpp"

namespace lightloc {

Mlp Mlp::from_parts(std::vector<MlpLayer> layers, std::vector<SkipLink> skips) {
    Mlp mlp;
    mlp.layers_ = std::move(layers);
    mlp.skips_ = std::move(skips);
    mlp.validate();
    return mlp;
}

Mlp Mlp::make(const std::vector<int>& widths, std::uint64_t seed,
              const std::vector<SkipLink>& skips, Activation hidden_act) {
    if (widths.size() < 2) {
        throw Error(ErrorCode::ShapeMismatch, "need at least input and output widths");
    }
    Rng rng(seed);
    Mlp mlp;
    mlp.skips_ = skips;
    for (std::size_t i = 1; i < widths.size(); ++i) {
        MlpLayer layer;
        const int fan_in = widths[i - 1];
        const int fan_out = widths[i];
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        layer.weight.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                layer.weight(r, c) = scale * rng.normal();
            }
        }
        layer.bias = Vector::Zero(fan_out);
        layer.activation = (i + 1 == widths.size()) ? Activation::Identity : hidden_act;
        mlp.layers_.push_back(std::move(layer));
    }
    mlp.validate();
    return mlp;
}

int Mlp::input_width() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int Mlp::output_width() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const MlpLayer& l : layers_) {
        n += static_cast<std::size_t>(l.weight.size()) + static_cast<std::size_t>(l.bias.size());
    }
    return n;
}

void Mlp::validate() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i].weight.allFinite() || !layers_[i].bias.allFinite()) {
            throw Error(ErrorCode::ShapeMismatch, "non-finite parameters in layer " + std::to_string(i));
        }
        if (layers_[i].weight.rows() != layers_[i].bias.size()) {
            throw Error(ErrorCode::ShapeMismatch, "bias/weight mismatch in layer " + std::to_string(i));
        }
        if (i > 0 && layers_[i].weight.cols() != layers_[i - 1].weight.rows()) {
            throw Error(ErrorCode::ShapeMismatch, "widths do not chain at layer " + std::to_string(i));
        }
    }
    const int n_layers = static_cast<int>(layers_.size());
    for (const SkipLink& s : skips_) {
        if (s.to < 0 || s.to >= n_layers || s.from < -1 || s.from >= s.to) {
            throw Error(ErrorCode::ShapeMismatch, "skip link out of range");
        }
        const long from_width = s.from < 0 ? layers_.front().weight.cols()
                                           : layers_[s.from].weight.rows();
        if (from_width != layers_[s.to].weight.rows()) {
            throw Error(ErrorCode::ShapeMismatch, "skip link width mismatch");
        }
    }
}

namespace {

inline Matrix apply_activation(const Matrix& z, Activation act) {
    if (act == Activation::Identity) return z;
    return z.cwiseMax(0.0);
}

// d act(z)/dz; ReLU derivative is 0 at z == 0.
inline Matrix activation_grad(const Matrix& z, Activation act) {
    if (act == Activation::Identity) return Matrix::Ones(z.rows(), z.cols());
    return (z.array() > 0.0).cast<double>().matrix();
}

}  // namespace

Matrix Mlp::forward(const Matrix& input) const {
    MlpTrace trace;
    return forward(input, trace);
}

Matrix Mlp::forward(const Matrix& input, MlpTrace& trace) const {
    if (input.cols() != input_width()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "input width " + std::to_string(input.cols()) + ", expected " +
                        std::to_string(input_width()));
    }
    trace.outputs.clear();
    trace.pre_activations.clear();
    trace.outputs.reserve(layers_.size() + 1);
    trace.pre_activations.reserve(layers_.size());
    trace.outputs.push_back(input);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const MlpLayer& layer = layers_[i];
        Matrix z = trace.outputs.back() * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        for (const SkipLink& s : skips_) {
            if (s.to == static_cast<int>(i)) {
                z += trace.outputs[static_cast<std::size_t>(s.from + 1)];
            }
        }
        trace.pre_activations.push_back(z);
        trace.outputs.push_back(apply_activation(z, layer.activation));
    }
    return trace.outputs.back();
}

MlpGradients Mlp::zero_gradients() const {
    MlpGradients g;
    g.weight.reserve(layers_.size());
    g.bias.reserve(layers_.size());
    for (const MlpLayer& l : layers_) {
        g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
}

Matrix Mlp::backward(const MlpTrace& trace, const Matrix& output_grad, MlpGradients& grads) const {
    if (trace.outputs.size() != layers_.size() + 1) {
        throw Error(ErrorCode::ShapeMismatch, "trace does not match network depth");
    }
    if (output_grad.rows() != trace.outputs.back().rows() ||
        output_grad.cols() != trace.outputs.back().cols()) {
        throw Error(ErrorCode::ShapeMismatch, "output gradient shape mismatch");
    }
    grads.weight.assign(layers_.size(), Matrix());
    grads.bias.assign(layers_.size(), Vector());

    // d_out[i] = dL/d outputs[i] (outputs[0] is the input batch).
    std::vector<Matrix> d_out(layers_.size() + 1);
    d_out.back() = output_grad;
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
        const MlpLayer& layer = layers_[static_cast<std::size_t>(i)];
        const Matrix dz = d_out[static_cast<std::size_t>(i + 1)]
                              .cwiseProduct(activation_grad(trace.pre_activations[static_cast<std::size_t>(i)],
                                                            layer.activation));
        grads.weight[static_cast<std::size_t>(i)] =
            dz.transpose() * trace.outputs[static_cast<std::size_t>(i)];
        grads.bias[static_cast<std::size_t>(i)] = dz.colwise().sum().transpose();
        Matrix d_prev = dz * layer.weight;
        if (d_out[static_cast<std::size_t>(i)].size() == 0) {
            d_out[static_cast<std::size_t>(i)] = std::move(d_prev);
        } else {
            d_out[static_cast<std::size_t>(i)] += d_prev;
        }
        for (const SkipLink& s : skips_) {
            if (s.to == i) {
                auto& slot = d_out[static_cast<std::size_t>(s.from + 1)];
                if (slot.size() == 0) {
                    slot = dz;
                } else {
                    slot += dz;
                }
            }
        }
    }
    return d_out.front();
}

void Optimizer::step(Mlp& mlp, const MlpGradients& grads, double lr) {
    auto& layers = mlp.layers();
    if (grads.weight.size() != layers.size()) {
        throw Error(ErrorCode::ShapeMismatch, "gradient/layer count mismatch");
    }
    if (kind_ == Kind::Gd) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weight = layers[i].weight * (1.0 - lr * weight_decay_) - lr * grads.weight[i];
            layers[i].bias -= lr * grads.bias[i];
        }
        return;
    }

    if (m_w_.empty()) {
        for (const MlpLayer& l : layers) {
            m_w_.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
            v_w_.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
            m_b_.push_back(Vector::Zero(l.bias.size()));
            v_b_.push_back(Vector::Zero(l.bias.size()));
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        m_w_[i] = beta1_ * m_w_[i] + (1.0 - beta1_) * grads.weight[i];
        v_w_[i] = beta2_ * v_w_[i] + (1.0 - beta2_) * grads.weight[i].cwiseProduct(grads.weight[i]);
        m_b_[i] = beta1_ * m_b_[i] + (1.0 - beta1_) * grads.bias[i];
        v_b_[i] = beta2_ * v_b_[i] + (1.0 - beta2_) * grads.bias[i].cwiseProduct(grads.bias[i]);

        const Matrix mw_hat = m_w_[i] / bc1;
        const Matrix vw_hat = v_w_[i] / bc2;
        const Vector mb_hat = m_b_[i] / bc1;
        const Vector vb_hat = v_b_[i] / bc2;

        layers[i].weight = layers[i].weight * (1.0 - lr * weight_decay_) -
                           lr * mw_hat.cwiseQuotient(vw_hat.cwiseSqrt().array().matrix() +
                                                     Matrix::Constant(vw_hat.rows(), vw_hat.cols(), eps_));
        layers[i].bias -=
            lr * mb_hat.cwiseQuotient(vb_hat.cwiseSqrt() + Vector::Constant(vb_hat.size(), eps_));
    }
}

double one_cycle_lr(double lr_min, double lr_max, double progress, double warmup_fraction) {
    progress = std::min(1.0, std::max(0.0, progress));
    if (progress < warmup_fraction) {
        return lr_min + (lr_max - lr_min) * (progress / warmup_fraction);
    }
    const double p = (progress - warmup_fraction) / (1.0 - warmup_fraction);
    return lr_min + (lr_max - lr_min) * 0.5 * (1.0 + std::cos(M_PI * p));
}

void write_mlp(BinaryWriter& w, const Mlp& mlp) {
    w.u32(static_cast<std::uint32_t>(mlp.layer_count()));
    for (const MlpLayer& l : mlp.layers()) {
        w.matrix(l.weight);
        w.vector(l.bias);
        w.u16(l.activation == Activation::ReLU ? 1 : 0);
    }
    w.u32(static_cast<std::uint32_t>(mlp.skip_links().size()));
    for (const SkipLink& s : mlp.skip_links()) {
        w.u32(static_cast<std::uint32_t>(s.from + 1));
        w.u32(static_cast<std::uint32_t>(s.to));
    }
}

Mlp read_mlp(BinaryReader& r) {
    const std::uint32_t n_layers = r.u32();
    std::vector<MlpLayer> layers(n_layers);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        layers[i].weight = r.matrix();
        layers[i].bias = r.vector();
        layers[i].activation = r.u16() == 1 ? Activation::ReLU : Activation::Identity;
    }
    const std::uint32_t n_skips = r.u32();
    std::vector<SkipLink> skips(n_skips);
    for (std::uint32_t i = 0; i < n_skips; ++i) {
        skips[i].from = static_cast<int>(r.u32()) - 1;
        skips[i].to = static_cast<int>(r.u32());
    }
    return Mlp::from_parts(std::move(layers), std::move(skips));
}

}  // namespace lightloc
