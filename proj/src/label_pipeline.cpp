#include "pairlab/label_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "pairlab/random.hpp"

namespace pairlab {

AnchorSet::AnchorSet(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
    if (anchors_.empty()) throw std::invalid_argument("an anchor set needs at least one anchor");
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
        const auto& a = anchors_[i];
        if (!std::isfinite(a.score)) throw std::invalid_argument("anchor score must be finite");
        if (!(a.percentile > 0.0 && a.percentile < 100.0)) {
            throw std::invalid_argument("anchor percentile must lie in (0, 100)");
        }
        if (i > 0) {
            if (!(a.score > anchors_[i - 1].score)) throw std::invalid_argument("anchor scores must strictly increase");
            if (!(a.percentile > anchors_[i - 1].percentile)) {
                throw std::invalid_argument("anchor percentiles must strictly increase");
            }
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (anchors_[j].sample == a.sample) throw std::invalid_argument("duplicate anchor '" + a.sample.str() + "'");
        }
    }
}

const Anchor* AnchorSet::find(const SampleId& id) const noexcept {
    for (const auto& a : anchors_) {
        if (a.sample == id) return &a;
    }
    return nullptr;
}

AnchorSet select_anchors(const RankingScores& scores, std::span<const double> percentiles) {
    if (percentiles.empty()) throw std::invalid_argument("at least one percentile is required");
    for (std::size_t i = 0; i < percentiles.size(); ++i) {
        if (!(percentiles[i] > 0.0 && percentiles[i] < 100.0)) {
            throw std::invalid_argument("percentiles must lie in (0, 100)");
        }
        if (i > 0 && !(percentiles[i] > percentiles[i - 1])) {
            throw std::invalid_argument("percentiles must be strictly increasing");
        }
    }
    const std::size_t n = scores.scores.size();
    if (n < percentiles.size()) throw std::invalid_argument("fewer samples than requested anchors");

    std::vector<std::pair<double, SampleId>> ranked;
    ranked.reserve(n);
    for (const auto& [id, s] : scores.scores) ranked.emplace_back(s, id);
    std::sort(ranked.begin(), ranked.end());

    std::vector<Anchor> anchors;
    for (double p : percentiles) {
        // p * N / 100 is exact for integral p and moderate N; the epsilon absorbs the rest.
        auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) / 100.0 - 1e-9));
        rank = std::clamp<std::size_t>(rank, 1, n);
        std::size_t pos = rank - 1;
        while (pos > 0 && ranked[pos - 1].first == ranked[pos].first) --pos;
        const auto& [score, id] = ranked[pos];
        if (!anchors.empty() && anchors.back().sample == id) {
            throw std::invalid_argument("percentiles " + std::to_string(anchors.back().percentile) + " and " +
                                        std::to_string(p) + " select the same sample '" + id.str() + "'");
        }
        anchors.push_back({id, score, p});
    }
    return AnchorSet(std::move(anchors));
}

int assign_label(double score, const AnchorSet& anchors) {
    int label = 0;
    for (const auto& a : anchors.anchors()) {
        if (score > a.score) ++label;
    }
    return label;
}

LabeledSample label_sample(const SampleId& new_sample, std::span<const ComparisonRecord> records,
                           const AnchorSet& anchors, const FitConfig& config) {
    for (const auto& a : anchors.anchors()) {
        const bool covered = std::any_of(records.begin(), records.end(), [&](const ComparisonRecord& r) {
            return r.involves(new_sample) && r.involves(a.sample);
        });
        if (!covered) {
            throw std::invalid_argument("sample '" + new_sample.str() + "' has no comparison with anchor '" +
                                        a.sample.str() + "'");
        }
    }
    const double score = fit_single(new_sample, records, anchors, config);
    return {new_sample, score, assign_label(score, anchors)};
}

std::vector<LabeledSample> label_all(std::span<const ComparisonRecord> records, const AnchorSet& anchors,
                                     const FitConfig& config, bool skip_incomplete) {
    std::map<SampleId, std::vector<ComparisonRecord>> by_sample;
    for (const auto& r : records) {
        validate_record(r);
        const bool left_anchor = anchors.find(r.left) != nullptr;
        const bool right_anchor = anchors.find(r.right) != nullptr;
        if (left_anchor == right_anchor) {
            throw std::invalid_argument("record " + r.left.str() + " vs " + r.right.str() +
                                        " must pair exactly one anchor with one new sample");
        }
        by_sample[left_anchor ? r.right : r.left].push_back(r);
    }

    std::vector<LabeledSample> out;
    out.reserve(by_sample.size());
    for (const auto& [id, own] : by_sample) {
        if (skip_incomplete) {
            const bool complete = std::all_of(anchors.anchors().begin(), anchors.anchors().end(), [&](const Anchor& a) {
                return std::any_of(own.begin(), own.end(), [&](const ComparisonRecord& r) { return r.involves(a.sample); });
            });
            if (!complete) continue;
        }
        const auto ordered = canonical_order(own);
        out.push_back(label_sample(id, ordered, anchors, config));
    }
    return out;
}

GroupPartition partition_groups(std::span<const LabeledSample> labels, int levels) {
    if (levels != 2) {
        throw UnsupportedConfiguration("high/medium/low grouping requires exactly 2 anchors, got " +
                                       std::to_string(levels));
    }
    GroupPartition groups;
    for (const auto& s : labels) {
        switch (s.label) {
            case 0: groups.low.insert(s.sample); break;
            case 1: groups.medium.insert(s.sample); break;
            case 2: groups.high.insert(s.sample); break;
            default:
                throw std::invalid_argument("label " + std::to_string(s.label) + " of '" + s.sample.str() +
                                            "' is outside [0, 2]");
        }
    }
    return groups;
}

BinaryGroups training_filter(const GroupPartition& partition) {
    return {partition.high, partition.low};
}

DatasetSplit make_split(const std::set<SampleId>& samples, std::size_t test_count, double validation_fraction,
                        std::uint64_t seed) {
    if (test_count >= samples.size()) {
        throw std::invalid_argument("test_count must be smaller than the number of samples");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation_fraction must lie in (0, 1)");
    }
    std::vector<SampleId> order(samples.begin(), samples.end());
    Rng rng(seed);
    rng.shuffle(order);

    const std::size_t remaining = order.size() - test_count;
    const auto validation_count =
        static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(remaining)));
    if (validation_count >= remaining) throw std::invalid_argument("split leaves no training samples");

    DatasetSplit split;
    split.seed = seed;
    std::size_t i = 0;
    for (; i < test_count; ++i) split.test.insert(order[i]);
    for (; i < test_count + validation_count; ++i) split.validation.insert(order[i]);
    for (; i < order.size(); ++i) split.train.insert(order[i]);
    return split;
}

std::vector<std::pair<SampleId, SampleId>> schedule_anchor_comparisons(std::span<const SampleId> new_samples,
                                                                       const AnchorSet& anchors, int repeats) {
    if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
    std::vector<std::pair<SampleId, SampleId>> pairs;
    pairs.reserve(new_samples.size() * anchors.size() * static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        for (const auto& s : new_samples) {
            if (anchors.find(s) != nullptr) throw std::invalid_argument("'" + s.str() + "' is already an anchor");
            for (const auto& a : anchors.anchors()) pairs.emplace_back(s, a.sample);
        }
    }
    return pairs;
}

}  // namespace pairlab
