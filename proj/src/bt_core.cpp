#include "pairlab/bt_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pairlab {

namespace {

constexpr double kArmijo = 1e-4;

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Records reduced to (winner, loser) index pairs over samples numbered by first appearance.
struct IndexedRecords {
    std::vector<SampleId> ids;
    std::unordered_map<SampleId, std::size_t> index;
    std::vector<std::pair<std::size_t, std::size_t>> outcomes;
};

IndexedRecords index_records(std::span<const ComparisonRecord> records) {
    IndexedRecords out;
    out.outcomes.reserve(records.size());
    auto slot = [&](const SampleId& id) {
        auto [it, inserted] = out.index.try_emplace(id, out.ids.size());
        if (inserted) out.ids.push_back(id);
        return it->second;
    };
    for (const auto& r : records) {
        validate_record(r);
        const auto w = slot(r.winner_id());
        const auto l = slot(r.loser_id());
        out.outcomes.emplace_back(w, l);
    }
    return out;
}

class Objective {
public:
    Objective(const IndexedRecords& data, const FitConfig& config)
        : data_(data), inv_scale_(1.0 / config.scale), inv_var_(1.0 / (config.prior_stddev * config.prior_stddev)) {}

    double value(const std::vector<double>& a) const {
        double sum = 0.0;
        for (const auto& [w, l] : data_.outcomes) sum += log_sigmoid((a[w] - a[l]) * inv_scale_);
        double prior = 0.0;
        for (double x : a) prior += x * x;
        return sum - 0.5 * prior * inv_var_;
    }

    void gradient(const std::vector<double>& a, std::vector<double>& g) const {
        g.assign(a.size(), 0.0);
        for (const auto& [w, l] : data_.outcomes) {
            const double push = sigmoid(-(a[w] - a[l]) * inv_scale_) * inv_scale_;
            g[w] += push;
            g[l] -= push;
        }
        for (std::size_t k = 0; k < a.size(); ++k) g[k] -= a[k] * inv_var_;
    }

private:
    const IndexedRecords& data_;
    double inv_scale_;
    double inv_var_;
};

double dot(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double inf_norm(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

void FitConfig::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("scale must be positive");
    if (!(prior_stddev > 0.0) || !std::isfinite(prior_stddev)) {
        throw std::invalid_argument("prior_stddev must be positive");
    }
    if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
    if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("gradient_tolerance must be positive");
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double bt_probability(double a_i, double a_j, double scale) {
    require_finite(a_i, "a_i");
    require_finite(a_j, "a_j");
    require_finite(scale, "scale");
    if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
    return sigmoid((a_i - a_j) / scale);
}

double log_likelihood(const ScoreMap& scores, std::span<const ComparisonRecord> records, const FitConfig& config) {
    config.validate();
    double sum = 0.0;
    for (const auto& r : records) {
        validate_record(r);
        auto w = scores.find(r.winner_id());
        auto l = scores.find(r.loser_id());
        if (w == scores.end() || l == scores.end()) {
            const auto& missing = w == scores.end() ? r.winner_id() : r.loser_id();
            throw std::invalid_argument("no score entry for sample '" + missing.str() + "'");
        }
        sum += log_sigmoid((w->second - l->second) / config.scale);
    }
    return sum;
}

double log_posterior(const ScoreMap& scores, std::span<const ComparisonRecord> records, const FitConfig& config) {
    const double likelihood = log_likelihood(scores, records, config);
    double prior = 0.0;
    for (const auto& [id, a] : scores) prior += a * a;
    return likelihood - 0.5 * prior / (config.prior_stddev * config.prior_stddev);
}

ScoreMap log_posterior_gradient(const ScoreMap& scores, std::span<const ComparisonRecord> records,
                                const FitConfig& config) {
    config.validate();
    ScoreMap grad;
    const double inv_var = 1.0 / (config.prior_stddev * config.prior_stddev);
    for (const auto& [id, a] : scores) grad.emplace(id, -a * inv_var);
    for (const auto& r : records) {
        validate_record(r);
        auto w = scores.find(r.winner_id());
        auto l = scores.find(r.loser_id());
        if (w == scores.end() || l == scores.end()) {
            const auto& missing = w == scores.end() ? r.winner_id() : r.loser_id();
            throw std::invalid_argument("no score entry for sample '" + missing.str() + "'");
        }
        const double push = sigmoid(-(w->second - l->second) / config.scale) / config.scale;
        grad.at(r.winner_id()) += push;
        grad.at(r.loser_id()) -= push;
    }
    return grad;
}

double population_stddev(const ScoreMap& scores) {
    if (scores.empty()) return 0.0;
    double mean = 0.0;
    for (const auto& [id, a] : scores) mean += a;
    mean /= static_cast<double>(scores.size());
    double ss = 0.0;
    for (const auto& [id, a] : scores) ss += (a - mean) * (a - mean);
    return std::sqrt(ss / static_cast<double>(scores.size()));
}

RankingScores fit_map(std::span<const ComparisonRecord> records, const FitConfig& config) {
    return fit_map(records, config, ScoreMap{});
}

RankingScores fit_map(std::span<const ComparisonRecord> records, const FitConfig& config, const ScoreMap& initial) {
    config.validate();
    if (records.empty()) throw std::invalid_argument("fit_map needs at least one comparison record");
    const IndexedRecords data = index_records(records);

    std::vector<double> a(data.ids.size(), 0.0);
    for (const auto& [id, value] : initial) {
        auto it = data.index.find(id);
        if (it == data.index.end()) {
            throw std::invalid_argument("sample '" + id.str() + "' appears in no comparison record");
        }
        require_finite(value, "initial score");
        a[it->second] = value;
    }

    const Objective objective(data, config);
    double f = objective.value(a);
    std::vector<double> g;
    objective.gradient(a, g);
    std::vector<double> trial(a.size());
    std::vector<double> trial_g;

    RankingScores result;
    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        if (inf_norm(g) <= config.gradient_tolerance) {
            result.converged = true;
            break;
        }
        const double slope = dot(g, g);
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-20) {
            for (std::size_t k = 0; k < a.size(); ++k) trial[k] = a[k] + step * g[k];
            const double f_trial = objective.value(trial);
            const double gain = f_trial - f;
            if (gain >= kArmijo * step * slope) {
                accepted = true;
                objective.gradient(trial, trial_g);
            } else if (std::abs(gain) <= 1e-12 * (1.0 + std::abs(f))) {
                // Change below roundoff. Concavity gives f(trial) - f >= step * g_trial.g, so this
                // certifies the Armijo gain without resolving the difference of two large sums.
                objective.gradient(trial, trial_g);
                accepted = dot(trial_g, g) >= kArmijo * slope;
            }
            if (accepted) {
                a.swap(trial);
                g.swap(trial_g);
                f = f_trial;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    if (!result.converged && inf_norm(g) <= config.gradient_tolerance) result.converged = true;

    result.iterations = iter;
    for (std::size_t k = 0; k < a.size(); ++k) result.scores.emplace(data.ids[k], a[k]);
    result.sigma = population_stddev(result.scores);
    return result;
}

double fit_single(const SampleId& new_sample, std::span<const ComparisonRecord> records, const AnchorSet& anchors,
                  const FitConfig& config) {
    config.validate();
    if (records.empty()) throw std::invalid_argument("fit_single needs at least one comparison record");

    struct Term {
        double anchor_score;
        bool won;
    };
    std::vector<Term> terms;
    terms.reserve(records.size());
    for (const auto& r : records) {
        validate_record(r);
        if (!r.involves(new_sample)) {
            throw std::invalid_argument("record " + r.left.str() + " vs " + r.right.str() + " does not involve '" +
                                        new_sample.str() + "'");
        }
        const SampleId& opponent = r.left == new_sample ? r.right : r.left;
        const Anchor* anchor = anchors.find(opponent);
        if (anchor == nullptr) throw std::invalid_argument("opponent '" + opponent.str() + "' is not an anchor");
        terms.push_back({anchor->score, r.winner_id() == new_sample});
    }

    const double inv_scale = 1.0 / config.scale;
    const double inv_var = 1.0 / (config.prior_stddev * config.prior_stddev);
    // derivative and second derivative of the (strictly concave) 1-D objective
    auto derivatives = [&](double x) {
        double d1 = -x * inv_var;
        double d2 = -inv_var;
        for (const auto& t : terms) {
            const double u = (x - t.anchor_score) * inv_scale;
            const double p = sigmoid(u);
            d1 += (t.won ? 1.0 - p : -p) * inv_scale;
            d2 -= p * (1.0 - p) * inv_scale * inv_scale;
        }
        return std::pair{d1, d2};
    };

    // The root of d1 lies within +-(m * prior_var / scale).
    const double reach = static_cast<double>(terms.size()) * inv_scale / inv_var;
    double lo = -reach - 1.0;
    double hi = reach + 1.0;
    double x = 0.0;
    for (int iter = 0; iter < std::max(config.max_iterations, 200); ++iter) {
        const auto [d1, d2] = derivatives(x);
        if (std::abs(d1) <= config.gradient_tolerance) break;
        if (d1 > 0.0) lo = x; else hi = x;
        double next = x - d1 / d2;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x || hi - lo <= 1e-15 * (1.0 + std::abs(x))) break;
        x = next;
    }
    return x;
}

}  // namespace pairlab
