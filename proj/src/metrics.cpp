#include "pairlab/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pairlab {

namespace {

void check_lengths(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size()) throw std::invalid_argument("predicted and actual differ in length");
    if (predicted.empty()) throw std::invalid_argument("metrics need at least one prediction");
}

}  // namespace

ConfusionCounts confusion_counts(std::span<const int> predicted, std::span<const int> actual, int num_classes) {
    check_lengths(predicted, actual);
    if (num_classes < 1) throw std::invalid_argument("num_classes must be positive");
    const auto k = static_cast<std::size_t>(num_classes);
    ConfusionCounts c{std::vector<long>(k, 0), std::vector<long>(k, 0), std::vector<long>(k, 0)};
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const int p = predicted[i];
        const int a = actual[i];
        if (p < 0 || p >= num_classes || a < 0 || a >= num_classes) {
            throw std::invalid_argument("label out of range [0, " + std::to_string(num_classes) + ")");
        }
        if (p == a) {
            ++c.true_positive[static_cast<std::size_t>(p)];
        } else {
            ++c.false_positive[static_cast<std::size_t>(p)];
            ++c.false_negative[static_cast<std::size_t>(a)];
        }
    }
    return c;
}

double accuracy(std::span<const int> predicted, std::span<const int> actual) {
    check_lengths(predicted, actual);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double macro_f1(std::span<const int> predicted, std::span<const int> actual, int num_classes) {
    const auto c = confusion_counts(predicted, actual, num_classes);
    double total = 0.0;
    for (std::size_t k = 0; k < c.true_positive.size(); ++k) {
        // F1 = 2TP / (2TP + FP + FN)
        const double denom = 2.0 * c.true_positive[k] + c.false_positive[k] + c.false_negative[k];
        total += denom > 0.0 ? 2.0 * c.true_positive[k] / denom : 0.0;
    }
    return total / num_classes;
}

double kendall_tau(const ScoreMap& order_a, const ScoreMap& order_b) {
    if (order_a.size() != order_b.size()) throw std::invalid_argument("score maps have different key sets");
    std::vector<double> x;
    std::vector<double> y;
    x.reserve(order_a.size());
    y.reserve(order_a.size());
    for (const auto& [id, a] : order_a) {
        auto it = order_b.find(id);
        if (it == order_b.end()) throw std::invalid_argument("key '" + id.str() + "' missing from second map");
        x.push_back(a);
        y.push_back(it->second);
    }
    if (x.size() < 2) throw std::invalid_argument("kendall_tau needs at least two keys");

    long long concordant = 0;
    long long discordant = 0;
    long long ties_x = 0;
    long long ties_y = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) continue;
            if (dx == 0.0) {
                ++ties_x;
            } else if (dy == 0.0) {
                ++ties_y;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double n0 = static_cast<double>(concordant + discordant);
    const double denom = std::sqrt((n0 + ties_x) * (n0 + ties_y));
    if (denom == 0.0) return 0.0;
    return static_cast<double>(concordant - discordant) / denom;
}

}  // namespace pairlab
