#pragma once

#include <map>
#include <optional>
#include <span>

#include "pairlab/anchor_set.hpp"
#include "pairlab/records.hpp"

namespace pairlab {

using ScoreMap = std::map<SampleId, double>;

struct FitConfig {
    double scale = 1.0;         ///< sigma inside the logistic link while fitting
    double prior_stddev = 1.0;  ///< width of the N(0, prior_stddev^2) prior on each score
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;

    void validate() const;
};

struct RankingScores {
    ScoreMap scores;
    double sigma = 0.0;  ///< population stddev of `scores`; descriptive only, never fed back into fitting
    bool converged = false;
    int iterations = 0;
};

/// P(i beats j) = 1 / (1 + exp(-(a_i - a_j) / scale)).
double bt_probability(double a_i, double a_j, double scale);

/// Numerically stable log(1 / (1 + exp(-x))).
double log_sigmoid(double x);

/// Sum of log-likelihood terms only (no prior).
double log_likelihood(const ScoreMap& scores, std::span<const ComparisonRecord> records, const FitConfig& config);

/// Log-likelihood plus the Gaussian log-prior over every entry of `scores`.
/// The Gaussian normalization constant is dropped.
double log_posterior(const ScoreMap& scores, std::span<const ComparisonRecord> records, const FitConfig& config);

ScoreMap log_posterior_gradient(const ScoreMap& scores, std::span<const ComparisonRecord> records,
                                const FitConfig& config);

/// Population standard deviation of the score values (0 for an empty map).
double population_stddev(const ScoreMap& scores);

/// MAP scores by gradient ascent with Armijo backtracking, starting at the prior mode.
///
/// Terms are accumulated in record order and samples are indexed by first appearance, so
/// the result is a pure function of the record sequence. Non-convergence is reported through
/// RankingScores::converged, not thrown.
RankingScores fit_map(std::span<const ComparisonRecord> records, const FitConfig& config = {});

/// As above, starting from `initial`. Entries missing from `initial` start at 0; entries for
/// samples that appear in no record are rejected.
RankingScores fit_map(std::span<const ComparisonRecord> records, const FitConfig& config, const ScoreMap& initial);

/// One-dimensional MAP estimate of a new sample's score with every anchor score held fixed.
double fit_single(const SampleId& new_sample, std::span<const ComparisonRecord> records, const AnchorSet& anchors,
                  const FitConfig& config = {});

}  // namespace pairlab
