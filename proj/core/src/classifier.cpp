#include "lightloc/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "lightloc/serial.hpp"

namespace lightloc {

bool is_probability_vector(const Vector& v, double tol) {
    if (v.size() == 0 || !v.allFinite()) return false;
    if (v.minCoeff() < -tol) return false;
    return std::abs(v.sum() - 1.0) <= tol;
}

double smoothed_ce(const Vector& pred, int label, double epsilon) {
    if (!is_probability_vector(pred)) {
        throw Error(ErrorCode::ShapeMismatch, "prediction is not a probability vector");
    }
    if (label < 0 || label >= pred.size()) {
        throw Error(ErrorCode::ShapeMismatch, "label out of range");
    }
    if (epsilon < 0.0 || epsilon >= 1.0) {
        throw Error(ErrorCode::InvalidConfig, "epsilon must be in [0, 1)");
    }
    const double k = static_cast<double>(pred.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const double target = (i == label ? 1.0 - epsilon : 0.0) + epsilon / k;
        loss -= target * std::log(std::max(pred(i), 1e-12));
    }
    return loss;
}

Vector softmax(const Vector& logits) {
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        out.row(r) = softmax(logits.row(r).transpose()).transpose();
    }
    return out;
}

double confidence(const Vector& p1, const Vector& p2) {
    if (!is_probability_vector(p1) || !is_probability_vector(p2)) {
        throw Error(ErrorCode::ShapeMismatch, "confidence expects probability vectors");
    }
    return p1.maxCoeff() * p2.maxCoeff();
}

Vector guidance_feature(const Vector& p1, double sigma, Rng& rng) {
    if (sigma < 0.0) throw Error(ErrorCode::InvalidConfig, "sigma must be >= 0");
    if (p1.norm() < 1e-12) throw Error(ErrorCode::ZeroVector, "probability vector has zero norm");
    Vector v = p1 / p1.norm();
    if (sigma == 0.0) return v;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Vector noised = v;
        for (Eigen::Index i = 0; i < noised.size(); ++i) noised(i) += rng.normal(0.0, sigma);
        const double n = noised.norm();
        if (n >= 1e-12) return noised / n;
    }
    throw Error(ErrorCode::ZeroVector, "noised guidance vector collapsed to zero twice");
}

ClassifierHead ClassifierHead::make(const ClassifierConfig& config) {
    if (config.input_dim <= 0 || config.k1 < 1 || config.k2 < 1) {
        throw Error(ErrorCode::InvalidConfig, "classifier needs input_dim > 0 and k1, k2 >= 1");
    }
    ClassifierHead head;
    std::vector<int> w1 = {config.input_dim};
    w1.insert(w1.end(), config.level1_hidden.begin(), config.level1_hidden.end());
    w1.push_back(config.k1);
    std::vector<int> w2 = {config.input_dim};
    w2.insert(w2.end(), config.level2_hidden.begin(), config.level2_hidden.end());
    w2.push_back(config.k2);
    head.level1_ = Mlp::make(w1, derive_seed(config.seed, "classifier.level1"));
    head.level2_ = Mlp::make(w2, derive_seed(config.seed, "classifier.level2"));

    // Start near the identity modulation: scale(p1) ~ 1, shift(p1) ~ 0.
    Rng rng(derive_seed(config.seed, "classifier.modulation"));
    head.scale_map_ = Matrix::Ones(config.input_dim, config.k1);
    head.shift_map_ = Matrix::Zero(config.input_dim, config.k1);
    for (Eigen::Index r = 0; r < head.scale_map_.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.scale_map_.cols(); ++c) {
            head.scale_map_(r, c) += 0.01 * rng.normal();
            head.shift_map_(r, c) += 0.01 * rng.normal();
        }
    }
    head.input_mean_ = Vector::Zero(config.input_dim);
    head.input_inv_scale_ = Vector::Ones(config.input_dim);
    return head;
}

void ClassifierHead::set_input_normalization(const Vector& mean, const Vector& inv_scale) {
    if (mean.size() != input_dim() || inv_scale.size() != input_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "normalization stats do not match input width");
    }
    input_mean_ = mean;
    input_inv_scale_ = inv_scale;
}

Matrix ClassifierHead::normalize(const Matrix& features) const {
    if (input_mean_.size() == 0) return features;
    return (features.rowwise() - input_mean_.transpose()) * input_inv_scale_.asDiagonal();
}

ClassifierHead::Output ClassifierHead::forward(const Matrix& features) const {
    if (features.cols() != level1_.input_width()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "feature width " + std::to_string(features.cols()) + ", expected " +
                        std::to_string(level1_.input_width()));
    }
    const Matrix x = normalize(features);
    Output out;
    out.p1 = softmax_rows(level1_.forward(x));
    const Matrix scale = out.p1 * scale_map_.transpose();  // batch x d
    const Matrix shift = out.p1 * shift_map_.transpose();
    const Matrix modulated = x.cwiseProduct(scale) + shift;
    out.p2 = softmax_rows(level2_.forward(modulated));
    return out;
}

ClassifierHead::Output ClassifierHead::forward(const Vector& feature) const {
    return forward(Matrix(feature.transpose()));
}

namespace {

// Smoothed one-hot target rows.
Matrix smooth_targets(const std::vector<int>& labels, int k, double epsilon) {
    Matrix q = Matrix::Constant(static_cast<Eigen::Index>(labels.size()), k,
                                epsilon / static_cast<double>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k) {
            throw Error(ErrorCode::ShapeMismatch, "label out of range");
        }
        q(static_cast<Eigen::Index>(i), labels[i]) += 1.0 - epsilon;
    }
    return q;
}

double mean_ce(const Matrix& probs, const Matrix& targets) {
    const Matrix logp = probs.cwiseMax(1e-12).array().log().matrix();
    return -(targets.cwiseProduct(logp)).sum() / static_cast<double>(probs.rows());
}

// Jacobian-vector product of row-wise softmax: given dL/dp and p, returns
// dL/dlogits = p .* (dL/dp - rowsum(dL/dp .* p)).
Matrix softmax_backward_rows(const Matrix& p, const Matrix& dp) {
    const Vector inner = (dp.cwiseProduct(p)).rowwise().sum();
    return p.cwiseProduct(dp - inner * Eigen::RowVectorXd::Ones(p.cols()));
}

}  // namespace

ClassifierHead::BackwardResult ClassifierHead::backward(const Batch& batch, double epsilon) const {
    const Eigen::Index n = batch.features.rows();
    if (static_cast<Eigen::Index>(batch.level1.size()) != n ||
        static_cast<Eigen::Index>(batch.level2.size()) != n) {
        throw Error(ErrorCode::ShapeMismatch, "label count does not match batch size");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const Matrix x = normalize(batch.features);

    MlpTrace trace1;
    const Matrix logits1 = level1_.forward(x, trace1);
    const Matrix p1 = softmax_rows(logits1);

    const Matrix scale = p1 * scale_map_.transpose();
    const Matrix shift = p1 * shift_map_.transpose();
    const Matrix modulated = x.cwiseProduct(scale) + shift;

    MlpTrace trace2;
    const Matrix logits2 = level2_.forward(modulated, trace2);
    const Matrix p2 = softmax_rows(logits2);

    const Matrix q1 = smooth_targets(batch.level1, k1(), epsilon);
    const Matrix q2 = smooth_targets(batch.level2, k2(), epsilon);

    BackwardResult res;
    res.loss_level1 = mean_ce(p1, q1);
    res.loss_level2 = mean_ce(p2, q2);
    res.loss = res.loss_level1 + res.loss_level2;

    // Level-2 branch: fused softmax + CE gradient.
    const Matrix dlogits2 = (p2 - q2) * inv_n;
    const Matrix dmod = level2_.backward(trace2, dlogits2, res.level2_grads);

    const Matrix dscale = dmod.cwiseProduct(x);
    res.scale_map_grad = dscale.transpose() * p1;  // d x k1
    res.shift_map_grad = dmod.transpose() * p1;
    res.input_grad = dmod.cwiseProduct(scale);

    // Level-1 logits receive the CE gradient plus the modulation path routed
    // back through the softmax Jacobian.
    const Matrix dp1 = dscale * scale_map_ + dmod * shift_map_;
    const Matrix dlogits1 = (p1 - q1) * inv_n + softmax_backward_rows(p1, dp1);
    res.input_grad += level1_.backward(trace1, dlogits1, res.level1_grads);
    // Chain through the whitening so the input gradient refers to raw
    // features.
    if (input_inv_scale_.size() > 0) {
        res.input_grad = res.input_grad * input_inv_scale_.asDiagonal();
    }
    return res;
}

void ClassifierHead::apply_update(const BackwardResult& grads, double lr) {
    auto& l1 = level1_.layers();
    for (std::size_t i = 0; i < l1.size(); ++i) {
        l1[i].weight -= lr * grads.level1_grads.weight[i];
        l1[i].bias -= lr * grads.level1_grads.bias[i];
    }
    auto& l2 = level2_.layers();
    for (std::size_t i = 0; i < l2.size(); ++i) {
        l2[i].weight -= lr * grads.level2_grads.weight[i];
        l2[i].bias -= lr * grads.level2_grads.bias[i];
    }
    scale_map_ -= lr * grads.scale_map_grad;
    shift_map_ -= lr * grads.shift_map_grad;
}

namespace {

// Adam moments for one matrix-shaped parameter.
struct AdamMoments {
    Matrix m, v;
    void init(const Matrix& like) {
        m = Matrix::Zero(like.rows(), like.cols());
        v = Matrix::Zero(like.rows(), like.cols());
    }
    void step(Matrix& param, const Matrix& grad, double lr, long t, double weight_decay) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        param = param * (1.0 - lr * weight_decay) -
                lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
    }
};

}  // namespace

ClassifierHead train_classifier(const ClassifierHead::Batch& cache, const ClassifierConfig& config,
                                ClassifierTrainLog* log) {
    ClassifierHead head = ClassifierHead::make(config);
    const Eigen::Index n = cache.features.rows();
    if (n == 0) throw Error(ErrorCode::TooFewSamples, "empty feature cache");
    if (cache.features.cols() != config.input_dim) {
        throw Error(ErrorCode::ShapeMismatch, "cache width does not match config.input_dim");
    }
    if (config.epochs <= 0) return head;

    // Whiten the inputs using cache statistics.
    {
        const Vector mean = cache.features.colwise().mean().transpose();
        const Vector var =
            (cache.features.rowwise() - mean.transpose()).array().square().colwise().mean();
        Vector inv_scale(var.size());
        for (Eigen::Index i = 0; i < var.size(); ++i) {
            inv_scale(i) = 1.0 / std::sqrt(std::max(var(i), 1e-12));
        }
        head.set_input_normalization(mean, inv_scale);
    }

    const int batch_size = std::max(1, std::min<int>(config.batch_size, static_cast<int>(n)));
    const int batches_per_epoch = static_cast<int>((n + batch_size - 1) / batch_size);
    const long total_steps = static_cast<long>(config.epochs) * batches_per_epoch;

    Rng shuffle_rng(derive_seed(config.seed, "classifier.shuffle"));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    Optimizer opt1(config.optimizer, config.weight_decay);
    Optimizer opt2(config.optimizer, config.weight_decay);
    AdamMoments scale_adam, shift_adam;
    scale_adam.init(head.scale_map());
    shift_adam.init(head.shift_map());
    long step_idx = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int b = 0; b < batches_per_epoch; ++b) {
            const Eigen::Index begin = static_cast<Eigen::Index>(b) * batch_size;
            const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - begin);
            ClassifierHead::Batch mini;
            mini.features.resize(count, cache.features.cols());
            mini.level1.resize(static_cast<std::size_t>(count));
            mini.level2.resize(static_cast<std::size_t>(count));
            for (Eigen::Index i = 0; i < count; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(begin + i)];
                mini.features.row(i) = cache.features.row(src);
                mini.level1[static_cast<std::size_t>(i)] = cache.level1[static_cast<std::size_t>(src)];
                mini.level2[static_cast<std::size_t>(i)] = cache.level2[static_cast<std::size_t>(src)];
            }
            const auto res = head.backward(mini, config.epsilon);
            epoch_loss += res.loss * static_cast<double>(count);

            const double progress = static_cast<double>(step_idx) / static_cast<double>(total_steps);
            const double lr = one_cycle_lr(config.lr_min, config.lr_max, progress);
            ++step_idx;

            if (config.optimizer == Optimizer::Kind::Gd) {
                head.apply_update(res, lr);
            } else {
                opt1.step(head.level1_mlp(), res.level1_grads, lr);
                opt2.step(head.level2_mlp(), res.level2_grads, lr);
                scale_adam.step(head.scale_map(), res.scale_map_grad, lr, step_idx, 0.0);
                shift_adam.step(head.shift_map(), res.shift_map_grad, lr, step_idx, 0.0);
            }
        }
        if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    if (log) log->final_leaf_accuracy = leaf_accuracy(head, cache);
    return head;
}

double leaf_accuracy(const ClassifierHead& head, const ClassifierHead::Batch& data) {
    const auto out = head.forward(data.features);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
        Eigen::Index a1, a2;
        out.p1.row(i).maxCoeff(&a1);
        out.p2.row(i).maxCoeff(&a2);
        if (static_cast<int>(a1) == data.level1[static_cast<std::size_t>(i)] &&
            static_cast<int>(a2) == data.level2[static_cast<std::size_t>(i)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.features.rows());
}

namespace {
constexpr char kHeadMagic[4] = {'L', 'L', 'C', 'H'};
constexpr std::uint16_t kHeadVersion = 1;
}  // namespace

void save_classifier_head(const std::string& path, const ClassifierHead& head) {
    BinaryWriter w(path);
    w.magic(kHeadMagic);
    w.u16(kHeadVersion);
    write_mlp(w, head.level1_);
    write_mlp(w, head.level2_);
    w.matrix(head.scale_map_);
    w.matrix(head.shift_map_);
    w.vector(head.input_mean_);
    w.vector(head.input_inv_scale_);
    w.close();
}

ClassifierHead load_classifier_head(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kHeadMagic);
    r.expect_version(kHeadVersion);
    ClassifierHead head;
    head.level1_ = read_mlp(r);
    head.level2_ = read_mlp(r);
    head.scale_map_ = r.matrix();
    head.shift_map_ = r.matrix();
    head.input_mean_ = r.vector();
    head.input_inv_scale_ = r.vector();
    return head;
}

}  // namespace lightloc
