#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "pairlab/anchor_set.hpp"
#include "pairlab/bt_core.hpp"

namespace pairlab {

inline constexpr int kDefaultAnchorRepeats = 3;

/// Quartile anchors used throughout the experimental protocol.
inline const std::vector<double> kDefaultPercentiles{25.0, 75.0};

struct LabeledSample {
    SampleId sample;
    double score;  ///< fitted a* against the fixed anchors
    int label;     ///< number of anchors with score strictly below `score`
};

struct GroupPartition {
    std::set<SampleId> high;
    std::set<SampleId> medium;
    std::set<SampleId> low;
};

struct BinaryGroups {
    std::set<SampleId> positives;
    std::set<SampleId> negatives;
};

struct DatasetSplit {
    std::set<SampleId> train;
    std::set<SampleId> validation;
    std::set<SampleId> test;
    std::uint64_t seed = 0;
};

/// Nearest-rank anchors: for percentile p the sample at 1-based position ceil(p/100 * N) in
/// ascending (score, id) order. Within a run of tied scores the lowest id is taken; two
/// percentiles landing on the same sample are rejected.
AnchorSet select_anchors(const RankingScores& scores, std::span<const double> percentiles);

int assign_label(double score, const AnchorSet& anchors);

/// Requires at least one record against every anchor.
LabeledSample label_sample(const SampleId& new_sample, std::span<const ComparisonRecord> records,
                           const AnchorSet& anchors, const FitConfig& config = {});

/// Labels every non-anchor sample appearing in `records` (each record must pair exactly one
/// non-anchor sample with an anchor). Records are canonicalized per sample first, so the result
/// depends only on the judgment multiset. Output is sorted by sample id. With `skip_incomplete`,
/// samples not yet compared against every anchor are omitted instead of rejected.
std::vector<LabeledSample> label_all(std::span<const ComparisonRecord> records, const AnchorSet& anchors,
                                     const FitConfig& config = {}, bool skip_incomplete = false);

/// Three-group split for L = 2: label 2 -> high, 1 -> medium, 0 -> low.
GroupPartition partition_groups(std::span<const LabeledSample> labels, int levels);

/// High group becomes positives, low group negatives; medium is dropped.
BinaryGroups training_filter(const GroupPartition& partition);

/// Uniform test draw of `test_count`, then round(validation_fraction * remaining) for validation.
DatasetSplit make_split(const std::set<SampleId>& samples, std::size_t test_count, double validation_fraction,
                        std::uint64_t seed);

/// Round-robin (new sample, anchor) schedule: every new sample meets every anchor once per
/// repeat, cycling through all new samples before the next repeat begins.
std::vector<std::pair<SampleId, SampleId>> schedule_anchor_comparisons(std::span<const SampleId> new_samples,
                                                                       const AnchorSet& anchors, int repeats);

}  // namespace pairlab
