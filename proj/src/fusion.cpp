#include "pairlab/fusion.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pairlab/random.hpp"

namespace pairlab {

namespace {

void check_inputs(const Eigen::VectorXd& semantic, const Eigen::VectorXd& acoustic,
                  const Eigen::MatrixXd& semantic_projection, const Eigen::MatrixXd& acoustic_projection) {
    if (semantic.size() != semantic_projection.cols()) {
        throw std::invalid_argument("semantic embedding has dimension " + std::to_string(semantic.size()) +
                                    ", projection expects " + std::to_string(semantic_projection.cols()));
    }
    if (acoustic.size() != acoustic_projection.cols()) {
        throw std::invalid_argument("acoustic embedding has dimension " + std::to_string(acoustic.size()) +
                                    ", projection expects " + std::to_string(acoustic_projection.cols()));
    }
    if (semantic_projection.rows() != acoustic_projection.rows()) {
        throw std::invalid_argument("projections map into spaces of different dimension");
    }
}

void check_batch(const FusionModel& model, std::span<const EmbeddingPair> batch) {
    if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
    for (const auto& pair : batch) {
        check_inputs(pair.semantic, pair.acoustic, model.semantic_projection, model.acoustic_projection);
        if (pair.label != 0 && pair.label != 1) {
            throw std::invalid_argument("label of '" + pair.id.str() + "' must be 0 or 1");
        }
    }
}

Eigen::Vector2d logits(const FusionModel& model, const Eigen::VectorXd& fused) {
    return model.head_weights * fused + model.head_bias;
}

Eigen::Vector2d log_softmax(const Eigen::Vector2d& z) {
    const double m = z.maxCoeff();
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    return z.array() - lse;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void FusionModel::validate() const {
    const auto p = semantic_projection.rows();
    if (p < 1) throw std::invalid_argument("projection dimension must be positive");
    if (acoustic_projection.rows() != p) throw std::invalid_argument("projection row counts differ");
    if (head_weights.rows() != 2 || head_weights.cols() != 2 * p) {
        throw std::invalid_argument("head weights must be 2 x 2p");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
    if (!semantic_projection.allFinite() || !acoustic_projection.allFinite() || !head_weights.allFinite() ||
        !head_bias.allFinite()) {
        throw std::invalid_argument("model parameters must be finite");
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
    if (projection_dim <= 0) throw std::invalid_argument("projection_dim must be positive");
}

double orth_penalty(const Eigen::VectorXd& semantic, const Eigen::VectorXd& acoustic,
                    const Eigen::MatrixXd& semantic_projection, const Eigen::MatrixXd& acoustic_projection) {
    check_inputs(semantic, acoustic, semantic_projection, acoustic_projection);
    const Eigen::VectorXd v = semantic_projection * semantic;
    const Eigen::VectorXd u = acoustic_projection * acoustic;
    const double nv = v.norm();
    const double nu = u.norm();
    if (nv < kDegenerateNorm || nu < kDegenerateNorm) return 0.0;
    return std::min(1.0, std::abs(u.dot(v)) / (nu * nv));
}

Eigen::VectorXd fuse(const Eigen::VectorXd& semantic, const Eigen::VectorXd& acoustic, const FusionModel& model) {
    check_inputs(semantic, acoustic, model.semantic_projection, model.acoustic_projection);
    const auto p = model.projection_dim();
    Eigen::VectorXd fused(2 * p);
    fused.head(p) = model.semantic_projection * semantic;
    fused.tail(p) = model.acoustic_projection * acoustic;
    return fused;
}

Eigen::Vector2d forward(const FusionModel& model, const EmbeddingPair& pair) {
    return log_softmax(logits(model, fuse(pair.semantic, pair.acoustic, model))).array().exp();
}

double total_loss(const FusionModel& model, std::span<const EmbeddingPair> batch) {
    check_batch(model, batch);
    double cross_entropy = 0.0;
    double penalty = 0.0;
    for (const auto& pair : batch) {
        const Eigen::Vector2d logp = log_softmax(logits(model, fuse(pair.semantic, pair.acoustic, model)));
        cross_entropy -= logp[pair.label];
        if (model.lambda != 0.0) {
            penalty += orth_penalty(pair.semantic, pair.acoustic, model.semantic_projection, model.acoustic_projection);
        }
    }
    const auto n = static_cast<double>(batch.size());
    return cross_entropy / n + model.lambda * penalty / n;
}

FusionGradient loss_gradient(const FusionModel& model, std::span<const EmbeddingPair> batch) {
    check_batch(model, batch);
    const auto p = model.projection_dim();
    FusionGradient g{Eigen::MatrixXd::Zero(p, model.semantic_dim()), Eigen::MatrixXd::Zero(p, model.acoustic_dim()),
                     Eigen::MatrixXd::Zero(2, 2 * p), Eigen::Vector2d::Zero()};
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    Eigen::VectorXd fused(2 * p);
    for (const auto& pair : batch) {
        const Eigen::VectorXd v = model.semantic_projection * pair.semantic;
        const Eigen::VectorXd u = model.acoustic_projection * pair.acoustic;
        fused.head(p) = v;
        fused.tail(p) = u;

        // cross-entropy through softmax: dL/dz = probs - onehot(label)
        Eigen::Vector2d dz = log_softmax(logits(model, fused)).array().exp();
        dz[pair.label] -= 1.0;
        dz *= inv_n;
        g.head_weights.noalias() += dz * fused.transpose();
        g.head_bias += dz;
        const Eigen::VectorXd dfused = model.head_weights.transpose() * dz;
        Eigen::VectorXd dv = dfused.head(p);
        Eigen::VectorXd du = dfused.tail(p);

        // |cos(u, v)|; d cos/dv = u/(|u||v|) - cos * v/|v|^2, symmetric in u
        const double nv = v.norm();
        const double nu = u.norm();
        if (model.lambda != 0.0 && nv >= kDegenerateNorm && nu >= kDegenerateNorm) {
            const double cos = u.dot(v) / (nu * nv);
            const double w = model.lambda * inv_n * sign(cos);
            if (w != 0.0) {
                dv += w * (u / (nu * nv) - cos * v / (nv * nv));
                du += w * (v / (nu * nv) - cos * u / (nu * nu));
            }
        }
        g.semantic_projection.noalias() += dv * pair.semantic.transpose();
        g.acoustic_projection.noalias() += du * pair.acoustic.transpose();
    }
    return g;
}

void gradient_step(FusionModel& model, const FusionGradient& gradient, double learning_rate) {
    model.semantic_projection -= learning_rate * gradient.semantic_projection;
    model.acoustic_projection -= learning_rate * gradient.acoustic_projection;
    model.head_weights -= learning_rate * gradient.head_weights;
    model.head_bias -= learning_rate * gradient.head_bias;
}

FusionModel init_model(Eigen::Index semantic_dim, Eigen::Index acoustic_dim, const TrainConfig& config) {
    config.validate();
    if (semantic_dim < 1 || acoustic_dim < 1) throw std::invalid_argument("embedding dimensions must be positive");
    const Eigen::Index p = config.projection_dim;
    Rng rng(config.seed);
    auto fill = [&](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-config.init_scale, config.init_scale);
        }
    };
    FusionModel model;
    fill(model.semantic_projection, p, semantic_dim);
    fill(model.acoustic_projection, p, acoustic_dim);
    fill(model.head_weights, 2, 2 * p);
    model.head_bias.setZero();
    model.lambda = config.mode == FusionMode::Concat ? 0.0 : config.lambda;
    return model;
}

FusionModel train(std::span<const EmbeddingPair> dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("training set is empty");
    bool has[2] = {false, false};
    for (const auto& pair : dataset) {
        if (pair.label == 0 || pair.label == 1) has[pair.label] = true;
    }
    if (!has[0] || !has[1]) throw std::invalid_argument("training set must contain both classes");

    FusionModel model = init_model(dataset.front().semantic.size(), dataset.front().acoustic.size(), config);
    check_batch(model, dataset);

    Rng shuffler(mix_seed(config.seed, 1));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EmbeddingPair> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffler.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
            gradient_step(model, loss_gradient(model, batch), config.learning_rate);
        }
    }
    return model;
}

int predict(const FusionModel& model, const EmbeddingPair& pair) {
    const Eigen::Vector2d probs = forward(model, pair);
    return probs[1] > probs[0] ? 1 : 0;
}

double mean_orth_penalty(const FusionModel& model, std::span<const EmbeddingPair> dataset) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    double sum = 0.0;
    for (const auto& pair : dataset) {
        sum += orth_penalty(pair.semantic, pair.acoustic, model.semantic_projection, model.acoustic_projection);
    }
    return sum / static_cast<double>(dataset.size());
}

std::vector<EmbeddingPair> restrict_modality(std::span<const EmbeddingPair> dataset, Modality keep) {
    std::vector<EmbeddingPair> out(dataset.begin(), dataset.end());
    for (auto& pair : out) {
        if (keep == Modality::SemanticOnly) pair.acoustic.setZero();
        if (keep == Modality::AcousticOnly) pair.semantic.setZero();
    }
    return out;
}

}  // namespace pairlab
