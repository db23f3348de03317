#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pairlab/bt_core.hpp"
#include "pairlab/fusion.hpp"

namespace pairlab {

/// Default judgment noise of the simulator. Latent scores are N(0, 1), so in logit units
/// the population spread is 1 / kDefaultJudgmentScale.
inline constexpr double kDefaultJudgmentScale = 0.2;

struct SyntheticWorld {
    ScoreMap true_scores;
    double judgment_scale = kDefaultJudgmentScale;
    std::uint64_t seed = 0;
};

using SamplePair = std::pair<SampleId, SampleId>;

/// Ids "s0000", "s0001", ... zero-padded so lexical order equals numeric order.
std::vector<SampleId> synthetic_ids(std::size_t n);

/// n i.i.d. standard-normal scores.
SyntheticWorld gen_true_scores(std::size_t n, std::uint64_t seed, double judgment_scale = kDefaultJudgmentScale);

std::vector<SampleId> world_ids(const SyntheticWorld& world);

/// Every sample draws `pairs_per_sample` uniformly random opponents other than itself; the
/// drawing sample is presented on the left.
std::vector<SamplePair> random_pairs(std::span<const SampleId> ids, std::size_t pairs_per_sample, std::uint64_t seed);

/// All unordered pairs (i < j) in id order.
std::vector<SamplePair> exhaustive_pairs(std::span<const SampleId> ids);

/// For each pair and repeat, left wins with probability bt_probability(true_left, true_right, judgment_scale).
std::vector<ComparisonRecord> sample_comparisons(const SyntheticWorld& world, std::span<const SamplePair> pairs,
                                                 int repeats, std::uint64_t seed);

/// Class +-1 signal along a seeded unit direction: in the first half of the semantic
/// coordinates with strength `informative_semantic`, and in the second half of the acoustic
/// coordinates with strength `informative_acoustic`. Gaussian noise of scale `noise` everywhere.
std::vector<EmbeddingPair> gen_embeddings(std::span<const std::pair<SampleId, int>> labels, int semantic_dim,
                                          int acoustic_dim, double informative_semantic, double informative_acoustic,
                                          double noise, std::uint64_t seed);

/// Exhaustive grid search of the MAP objective over [-bounds, bounds]^n (n <= 3 samples).
/// Evaluates its own objective so that it stays independent of the optimizer it checks.
ScoreMap oracle_map_grid(std::span<const ComparisonRecord> records, double bounds, double step,
                         const FitConfig& config = {});

}  // namespace pairlab
