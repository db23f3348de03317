#include "pairlab/datasim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "pairlab/random.hpp"

namespace pairlab {

std::vector<SampleId> synthetic_ids(std::size_t n) {
    int width = 4;
    for (std::size_t m = n > 0 ? n - 1 : 0; m >= 10000; m /= 10) ++width;
    std::vector<SampleId> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string digits = std::to_string(i);
        if (digits.size() < static_cast<std::size_t>(width)) digits.insert(0, width - digits.size(), '0');
        ids.emplace_back("s" + digits);
    }
    return ids;
}

SyntheticWorld gen_true_scores(std::size_t n, std::uint64_t seed, double judgment_scale) {
    if (n < 2) throw std::invalid_argument("a synthetic world needs at least 2 samples");
    if (!(judgment_scale > 0.0)) throw std::invalid_argument("judgment_scale must be positive");
    SyntheticWorld world;
    world.judgment_scale = judgment_scale;
    world.seed = seed;
    Rng rng(seed);
    for (auto& id : synthetic_ids(n)) world.true_scores.emplace(std::move(id), rng.normal());
    return world;
}

std::vector<SampleId> world_ids(const SyntheticWorld& world) {
    std::vector<SampleId> ids;
    ids.reserve(world.true_scores.size());
    for (const auto& [id, s] : world.true_scores) ids.push_back(id);
    return ids;
}

std::vector<SamplePair> random_pairs(std::span<const SampleId> ids, std::size_t pairs_per_sample, std::uint64_t seed) {
    if (ids.size() < 2) throw std::invalid_argument("pair scheduling needs at least 2 samples");
    Rng rng(seed);
    std::vector<SamplePair> pairs;
    pairs.reserve(ids.size() * pairs_per_sample);
    const auto n = static_cast<std::uint64_t>(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t k = 0; k < pairs_per_sample; ++k) {
            auto j = static_cast<std::size_t>(rng.index(n - 1));
            if (j >= i) ++j;
            pairs.emplace_back(ids[i], ids[j]);
        }
    }
    return pairs;
}

std::vector<SamplePair> exhaustive_pairs(std::span<const SampleId> ids) {
    std::vector<SamplePair> pairs;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) pairs.emplace_back(ids[i], ids[j]);
    }
    return pairs;
}

std::vector<ComparisonRecord> sample_comparisons(const SyntheticWorld& world, std::span<const SamplePair> pairs,
                                                 int repeats, std::uint64_t seed) {
    if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
    Rng rng(seed);
    // Fixed clock so that simulated files are byte-reproducible.
    const Timestamp base = parse_timestamp("2021-01-01T00:00:00Z");
    std::vector<ComparisonRecord> records;
    records.reserve(pairs.size() * static_cast<std::size_t>(repeats));
    for (const auto& [left, right] : pairs) {
        if (left == right) throw std::invalid_argument("pair compares '" + left.str() + "' with itself");
        const auto l = world.true_scores.find(left);
        const auto r = world.true_scores.find(right);
        if (l == world.true_scores.end() || r == world.true_scores.end()) {
            throw std::invalid_argument("pair references a sample without a true score");
        }
        const double p = bt_probability(l->second, r->second, world.judgment_scale);
        for (int r = 0; r < repeats; ++r) {
            const Winner w = rng.uniform() < p ? Winner::Left : Winner::Right;
            const auto ts = base + std::chrono::seconds(static_cast<long>(records.size()));
            records.push_back({left, right, w, "simulator", ts});
        }
    }
    return records;
}

std::vector<EmbeddingPair> gen_embeddings(std::span<const std::pair<SampleId, int>> labels, int semantic_dim,
                                          int acoustic_dim, double informative_semantic, double informative_acoustic,
                                          double noise, std::uint64_t seed) {
    if (semantic_dim < 2 || acoustic_dim < 2) throw std::invalid_argument("embedding dimensions must be >= 2");
    if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
    for (double s : {informative_semantic, informative_acoustic}) {
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("informativeness must lie in [0, 1]");
    }
    Rng rng(seed);

    auto unit_direction = [&](int dim, int begin, int end) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
        for (int i = begin; i < end; ++i) d[i] = rng.normal();
        const double norm = d.norm();
        if (norm > 0.0) d /= norm;
        return d;
    };
    const Eigen::VectorXd semantic_dir = unit_direction(semantic_dim, 0, semantic_dim / 2);
    const Eigen::VectorXd acoustic_dir = unit_direction(acoustic_dim, acoustic_dim / 2, acoustic_dim);

    std::vector<EmbeddingPair> out;
    out.reserve(labels.size());
    for (const auto& [id, label] : labels) {
        if (label != 0 && label != 1) throw std::invalid_argument("embedding labels must be 0 or 1");
        const double sign = label == 1 ? 1.0 : -1.0;
        EmbeddingPair pair{id, sign * informative_semantic * semantic_dir, sign * informative_acoustic * acoustic_dir,
                           label};
        for (int i = 0; i < semantic_dim; ++i) pair.semantic[i] += noise * rng.normal();
        for (int i = 0; i < acoustic_dim; ++i) pair.acoustic[i] += noise * rng.normal();
        out.push_back(std::move(pair));
    }
    return out;
}

ScoreMap oracle_map_grid(std::span<const ComparisonRecord> records, double bounds, double step,
                         const FitConfig& config) {
    config.validate();
    if (!(bounds > 0.0) || !(step > 0.0)) throw std::invalid_argument("bounds and step must be positive");

    std::map<SampleId, std::size_t> index;
    for (const auto& r : records) {
        validate_record(r);
        index.try_emplace(r.left, 0);
        index.try_emplace(r.right, 0);
    }
    if (index.size() > 3) throw UnsupportedConfiguration("grid oracle is limited to 3 samples");
    if (index.size() < 2) throw std::invalid_argument("grid oracle needs at least 2 samples");
    std::vector<SampleId> ids;
    for (auto& [id, slot] : index) {
        slot = ids.size();
        ids.push_back(id);
    }
    const std::size_t n = ids.size();

    const auto m = static_cast<long>(std::llround(2.0 * bounds / step));
    const auto points = static_cast<std::size_t>(m + 1);
    auto grid = [&](long i) { return -bounds + static_cast<double>(i) * step; };

    // wins[i][j] = number of records where i beat j
    std::vector<std::vector<long>> wins(n, std::vector<long>(n, 0));
    for (const auto& r : records) ++wins[index.at(r.winner_id())][index.at(r.loser_id())];

    // pair_table[i][j][d + m]: log-likelihood of all i-vs-j records at grid difference d = gi - gj
    auto log_f = [&](double u) {
        const double x = u / config.scale;
        return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    };
    std::vector<std::vector<std::vector<double>>> pair_table(n, std::vector<std::vector<double>>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            auto& table = pair_table[i][j];
            table.resize(static_cast<std::size_t>(2 * m + 1));
            for (long d = -m; d <= m; ++d) {
                const double u = static_cast<double>(d) * step;
                table[static_cast<std::size_t>(d + m)] =
                    static_cast<double>(wins[i][j]) * log_f(u) + static_cast<double>(wins[j][i]) * log_f(-u);
            }
        }
    }
    std::vector<double> prior(points);
    const double inv_var = 1.0 / (config.prior_stddev * config.prior_stddev);
    for (std::size_t i = 0; i < points; ++i) {
        const double g = grid(static_cast<long>(i));
        prior[i] = -0.5 * g * g * inv_var;
    }

    double best = -std::numeric_limits<double>::infinity();
    std::vector<long> best_at(n, 0);
    if (n == 2) {
        const auto& t01 = pair_table[0][1];
        for (long i = 0; i <= m; ++i) {
            for (long j = 0; j <= m; ++j) {
                const double v = prior[i] + prior[j] + t01[i - j + m];
                if (v > best) {
                    best = v;
                    best_at = {i, j};
                }
            }
        }
    } else {
        const auto& t01 = pair_table[0][1];
        const auto& t02 = pair_table[0][2];
        const auto& t12 = pair_table[1][2];
        for (long i = 0; i <= m; ++i) {
            for (long j = 0; j <= m; ++j) {
                const double base = prior[i] + prior[j] + t01[i - j + m];
                for (long k = 0; k <= m; ++k) {
                    const double v = base + prior[k] + t02[i - k + m] + t12[j - k + m];
                    if (v > best) {
                        best = v;
                        best_at = {i, j, k};
                    }
                }
            }
        }
    }

    ScoreMap out;
    for (std::size_t s = 0; s < n; ++s) out.emplace(ids[s], grid(best_at[s]));
    return out;
}

}  // namespace pairlab
