#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "pairlab/records.hpp"

namespace pairlab {

/// Fixed-size modality embeddings for one sample: semantic (text) and acoustic (audio).
struct EmbeddingPair {
    SampleId id;
    Eigen::VectorXd semantic;
    Eigen::VectorXd acoustic;
    int label = 0;
};

/// Two linear projections into a shared p-dimensional space, concatenated (semantic block
/// first) and fed to a linear softmax head over two classes.
struct FusionModel {
    Eigen::MatrixXd semantic_projection;  ///< p x d_w
    Eigen::MatrixXd acoustic_projection;  ///< p x d_a
    Eigen::MatrixXd head_weights;         ///< 2 x 2p
    Eigen::Vector2d head_bias = Eigen::Vector2d::Zero();
    double lambda = 0.0;  ///< weight of the orthogonality penalty

    Eigen::Index projection_dim() const { return semantic_projection.rows(); }
    Eigen::Index semantic_dim() const { return semantic_projection.cols(); }
    Eigen::Index acoustic_dim() const { return acoustic_projection.cols(); }

    /// Throws std::invalid_argument on inconsistent shapes, non-finite entries or negative lambda.
    void validate() const;
};

struct FusionGradient {
    Eigen::MatrixXd semantic_projection;
    Eigen::MatrixXd acoustic_projection;
    Eigen::MatrixXd head_weights;
    Eigen::Vector2d head_bias;
};

enum class FusionMode { Concat, Orth };

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 200;
    int batch_size = 32;
    double lambda = 0.1;
    std::uint64_t seed = 0;
    double init_scale = 0.1;
    int projection_dim = 16;
    FusionMode mode = FusionMode::Orth;  ///< Concat trains with lambda forced to 0

    void validate() const;
};

/// Projected norms below this are treated as degenerate: zero penalty, zero penalty gradient.
inline constexpr double kDegenerateNorm = 1e-12;

double orth_penalty(const Eigen::VectorXd& semantic, const Eigen::VectorXd& acoustic,
                    const Eigen::MatrixXd& semantic_projection, const Eigen::MatrixXd& acoustic_projection);

Eigen::VectorXd fuse(const Eigen::VectorXd& semantic, const Eigen::VectorXd& acoustic, const FusionModel& model);

/// Class probabilities (softmax of the head logits).
Eigen::Vector2d forward(const FusionModel& model, const EmbeddingPair& pair);

/// Mean cross-entropy plus lambda times the mean orthogonality penalty.
double total_loss(const FusionModel& model, std::span<const EmbeddingPair> batch);

FusionGradient loss_gradient(const FusionModel& model, std::span<const EmbeddingPair> batch);

/// model -= learning_rate * gradient
void gradient_step(FusionModel& model, const FusionGradient& gradient, double learning_rate);

/// Parameters uniform in (-init_scale, init_scale), zero bias.
FusionModel init_model(Eigen::Index semantic_dim, Eigen::Index acoustic_dim, const TrainConfig& config);

/// Seeded mini-batch gradient descent; bit-reproducible for a given config.
FusionModel train(std::span<const EmbeddingPair> dataset, const TrainConfig& config);

/// argmax of forward(); exact ties go to class 0.
int predict(const FusionModel& model, const EmbeddingPair& pair);

double mean_orth_penalty(const FusionModel& model, std::span<const EmbeddingPair> dataset);

enum class Modality { Both, SemanticOnly, AcousticOnly };

/// Copy of `dataset` with the other modality zeroed, for unimodal baselines.
std::vector<EmbeddingPair> restrict_modality(std::span<const EmbeddingPair> dataset, Modality keep);

}  // namespace pairlab
