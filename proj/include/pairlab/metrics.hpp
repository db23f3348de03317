#pragma once

#include <span>
#include <vector>

#include "pairlab/bt_core.hpp"

namespace pairlab {

struct ConfusionCounts {
    std::vector<long> true_positive;
    std::vector<long> false_positive;
    std::vector<long> false_negative;
};

ConfusionCounts confusion_counts(std::span<const int> predicted, std::span<const int> actual, int num_classes);

double accuracy(std::span<const int> predicted, std::span<const int> actual);

// Unweighted mean of per-class F1. A class with a zero precision+recall denominator,
// including one absent from both sequences, scores 0 rather than being skipped.
double macro_f1(std::span<const int> predicted, std::span<const int> actual, int num_classes);

// Kendall tau-b over the shared keys of two score maps.
double kendall_tau(const ScoreMap& order_a, const ScoreMap& order_b);

}  // namespace pairlab
