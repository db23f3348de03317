#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pairlab/datasim.hpp"
#include "pairlab/label_pipeline.hpp"
#include "pairlab/random.hpp"

using namespace pairlab;
using pairlab::testing::grid_argmax_1d;
using pairlab::testing::record;

namespace {

RankingScores ranking(const std::vector<double>& values, const std::string& prefix = "s") {
    RankingScores r;
    for (std::size_t i = 0; i < values.size(); ++i) r.scores.emplace(SampleId(prefix + std::to_string(1000 + i)), values[i]);
    r.sigma = population_stddev(r.scores);
    r.converged = true;
    return r;
}

AnchorSet quartile_anchors() { return AnchorSet({{SampleId("lo"), -0.67, 25.0}, {SampleId("hi"), 0.67, 75.0}}); }

std::vector<ComparisonRecord> repeated(const std::string& left, const std::string& right, int k,
                                       Winner winner = Winner::Left) {
    return std::vector<ComparisonRecord>(static_cast<std::size_t>(k), record(left, right, winner));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LabeledSample labeled(const char* id, int label) { return {SampleId(id), 0.0, label}; }

}  // namespace

TEST(SelectAnchors, NearestRankOnOneToHundred) {
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    const auto anchors = select_anchors(ranking(v), kDefaultPercentiles);
    ASSERT_EQ(anchors.size(), 2u);
    EXPECT_EQ(anchors[0].score, 25.0);
    EXPECT_EQ(anchors[1].score, 75.0);
    EXPECT_EQ(anchors[0].percentile, 25.0);
    EXPECT_EQ(anchors[1].percentile, 75.0);
}

TEST(SelectAnchors, MedianOfFour) {
    const auto anchors = select_anchors(ranking({2.0, -1.0, 1.0, 0.0}), std::vector<double>{50.0});
    ASSERT_EQ(anchors.size(), 1u);
    EXPECT_EQ(anchors[0].score, 0.0);
}

TEST(SelectAnchors, DefaultPercentilesGiveTwoAnchors) {
    EXPECT_EQ(kDefaultPercentiles, (std::vector<double>{25.0, 75.0}));
    Rng rng(1);
    std::vector<double> v;
    for (int i = 0; i < 37; ++i) v.push_back(rng.normal());
    EXPECT_EQ(select_anchors(ranking(v), kDefaultPercentiles).size(), 2u);
}

TEST(SelectAnchors, TiesPickLowestId) {
    RankingScores r;
    r.scores = {{SampleId("c"), 1.0}, {SampleId("a"), 1.0}, {SampleId("b"), 1.0}, {SampleId("d"), 5.0}};
    const auto anchors = select_anchors(r, std::vector<double>{25.0});
    EXPECT_EQ(anchors[0].sample, SampleId("a"));
}

TEST(SelectAnchors, TiedAnchorScoresRejected) {
    RankingScores r;
    r.scores = {{SampleId("a"), 1.0}, {SampleId("b"), 1.0}, {SampleId("c"), 1.0}, {SampleId("d"), 1.0}};
    EXPECT_THROW(select_anchors(r, kDefaultPercentiles), std::invalid_argument);
}

TEST(SelectAnchors, SameSampleForTwoPercentilesRejected) {
    EXPECT_THROW(select_anchors(ranking({1.0, 2.0}), std::vector<double>{10.0, 40.0}), std::invalid_argument);
}

TEST(SelectAnchors, BadPercentilesRejected) {
    const auto r = ranking({1.0, 2.0, 3.0, 4.0});
    EXPECT_THROW(select_anchors(r, std::vector<double>{0.0}), std::invalid_argument);
    EXPECT_THROW(select_anchors(r, std::vector<double>{100.0}), std::invalid_argument);
    EXPECT_THROW(select_anchors(r, std::vector<double>{75.0, 25.0}), std::invalid_argument);
    EXPECT_THROW(select_anchors(r, std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(select_anchors(ranking({1.0}), kDefaultPercentiles), std::invalid_argument);
}

TEST(AnchorSet, ConstructionInvariants) {
    EXPECT_THROW(AnchorSet({}), std::invalid_argument);
    EXPECT_THROW(AnchorSet({{SampleId("a"), 1.0, 25.0}, {SampleId("b"), 1.0, 75.0}}), std::invalid_argument);
    EXPECT_THROW(AnchorSet({{SampleId("a"), 1.0, 75.0}, {SampleId("b"), 2.0, 25.0}}), std::invalid_argument);
    EXPECT_THROW(AnchorSet({{SampleId("a"), 1.0, 25.0}, {SampleId("a"), 2.0, 75.0}}), std::invalid_argument);
    EXPECT_THROW(AnchorSet({{SampleId("a"), NAN, 25.0}}), std::invalid_argument);
    const auto set = quartile_anchors();
    EXPECT_NE(set.find(SampleId("lo")), nullptr);
    EXPECT_EQ(set.find(SampleId("zz")), nullptr);
}

TEST(AssignLabel, Examples) {
    const auto anchors = quartile_anchors();
    EXPECT_EQ(assign_label(-2.0, anchors), 0);
    EXPECT_EQ(assign_label(0.0, anchors), 1);
    EXPECT_EQ(assign_label(2.0, anchors), 2);
    EXPECT_EQ(assign_label(-0.67, anchors), 0);
    EXPECT_EQ(assign_label(0.67, anchors), 1);
}

TEST(LabelSample, BeatsBothAnchors) {
    std::vector<ComparisonRecord> records = repeated("new", "lo", 3);
    for (const auto& r : repeated("new", "hi", 3)) records.push_back(r);
    const auto result = label_sample(SampleId("new"), records, quartile_anchors());
    const double oracle = grid_argmax_1d(
        [](double x) { return 3 * std::log(sigmoid(x + 0.67)) + 3 * std::log(sigmoid(x - 0.67)) - 0.5 * x * x; }, -3.0,
        3.0, 0.001);
    EXPECT_GT(oracle, 0.67);
    EXPECT_NEAR(result.score, oracle, 1e-3);
    EXPECT_EQ(result.label, 2);
    EXPECT_EQ(result.sample, SampleId("new"));
}

TEST(LabelSample, LosesToBothAnchors) {
    std::vector<ComparisonRecord> records = repeated("lo", "new", 3);
    for (const auto& r : repeated("new", "hi", 3, Winner::Right)) records.push_back(r);
    const auto result = label_sample(SampleId("new"), records, quartile_anchors());
    EXPECT_LT(result.score, -0.67);
    EXPECT_EQ(result.label, 0);
}

TEST(LabelSample, BetweenAnchors) {
    std::vector<ComparisonRecord> records = repeated("new", "lo", 3);
    for (const auto& r : repeated("hi", "new", 3)) records.push_back(r);
    const auto result = label_sample(SampleId("new"), records, quartile_anchors());
    EXPECT_GT(result.score, -0.67);
    EXPECT_LT(result.score, 0.67);
    EXPECT_EQ(result.label, 1);
}

TEST(LabelSample, MissingAnchorCoverageRejected) {
    EXPECT_THROW(label_sample(SampleId("new"), repeated("new", "lo", 3), quartile_anchors()), std::invalid_argument);
}

TEST(LabelAll, GroupsBySampleAndSortsById) {
    std::vector<ComparisonRecord> records;
    for (const char* id : {"zeta", "alpha"}) {
        records.push_back(record(id, "lo"));
        records.push_back(record("hi", id));
    }
    const auto labels = label_all(records, quartile_anchors());
    ASSERT_EQ(labels.size(), 2u);
    EXPECT_EQ(labels[0].sample, SampleId("alpha"));
    EXPECT_EQ(labels[1].sample, SampleId("zeta"));
    EXPECT_EQ(labels[0].label, 1);
}

TEST(LabelAll, RejectsRecordsWithoutExactlyOneAnchor) {
    const std::vector<ComparisonRecord> both{record("lo", "hi")};
    EXPECT_THROW(label_all(both, quartile_anchors()), std::invalid_argument);
    const std::vector<ComparisonRecord> none{record("x", "y")};
    EXPECT_THROW(label_all(none, quartile_anchors()), std::invalid_argument);
}

TEST(LabelAll, SkipIncompleteDropsPartiallyCoveredSamples) {
    const std::vector<ComparisonRecord> records{record("x", "lo"), record("y", "lo"), record("y", "hi")};
    EXPECT_THROW(label_all(records, quartile_anchors()), std::invalid_argument);
    const auto labels = label_all(records, quartile_anchors(), {}, true);
    ASSERT_EQ(labels.size(), 1u);
    EXPECT_EQ(labels[0].sample, SampleId("y"));
}

TEST(LabelAll, EmptyInputGivesNoLabels) {
    EXPECT_TRUE(label_all(std::vector<ComparisonRecord>{}, quartile_anchors()).empty());
}

TEST(PartitionGroups, Examples) {
    const std::vector<LabeledSample> labels{labeled("first", 0), labeled("second", 1), labeled("third", 2)};
    const auto groups = partition_groups(labels, 2);
    EXPECT_EQ(groups.low, std::set<SampleId>{SampleId("first")});
    EXPECT_EQ(groups.medium, std::set<SampleId>{SampleId("second")});
    EXPECT_EQ(groups.high, std::set<SampleId>{SampleId("third")});

    const std::vector<LabeledSample> middle{labeled("a", 1), labeled("b", 1)};
    const auto only_medium = partition_groups(middle, 2);
    EXPECT_TRUE(only_medium.high.empty());
    EXPECT_TRUE(only_medium.low.empty());
    EXPECT_EQ(only_medium.medium.size(), 2u);
}

TEST(PartitionGroups, Errors) {
    const std::vector<LabeledSample> labels{labeled("a", 0)};
    EXPECT_THROW(partition_groups(labels, 3), UnsupportedConfiguration);
    EXPECT_THROW(partition_groups(labels, 1), UnsupportedConfiguration);
    const std::vector<LabeledSample> out_of_range{labeled("a", 3)};
    EXPECT_THROW(partition_groups(out_of_range, 2), std::invalid_argument);
}

TEST(PartitionGroups, SimulatedUniformScoresGiveQuarterHalfQuarter) {
    // true scores on an even grid; anchors are the 25th and 75th percentile samples
    SyntheticWorld world;
    world.judgment_scale = 0.1;
    for (int i = 0; i < 400; ++i) world.true_scores.emplace(SampleId("u" + std::to_string(1000 + i)), -2.0 + 0.01 * i);
    RankingScores truth;
    truth.scores = world.true_scores;
    const auto anchors = select_anchors(truth, kDefaultPercentiles);
    // anchors compared on the simulator's own scale
    std::vector<Anchor> scaled;
    for (const auto& a : anchors.anchors()) scaled.push_back({a.sample, a.score / world.judgment_scale, a.percentile});
    const AnchorSet fit_anchors(scaled);
    std::vector<SampleId> fresh;
    for (const auto& [id, s] : world.true_scores) {
        if (anchors.find(id) == nullptr) fresh.push_back(id);
    }
    const auto pairs = schedule_anchor_comparisons(fresh, anchors, 20);
    const auto records = sample_comparisons(world, pairs, 1, 5);
    FitConfig config;
    config.prior_stddev = 1.0 / world.judgment_scale;
    const auto groups = partition_groups(label_all(records, fit_anchors, config), 2);
    const double n = static_cast<double>(fresh.size());
    EXPECT_NEAR(groups.low.size() / n, 0.25, 0.05);
    EXPECT_NEAR(groups.medium.size() / n, 0.50, 0.05);
    EXPECT_NEAR(groups.high.size() / n, 0.25, 0.05);
}

TEST(TrainingFilter, DropsMedium) {
    GroupPartition p;
    p.high = {SampleId("A")};
    p.medium = {SampleId("B")};
    p.low = {SampleId("C")};
    const auto groups = training_filter(p);
    EXPECT_EQ(groups.positives, std::set<SampleId>{SampleId("A")});
    EXPECT_EQ(groups.negatives, std::set<SampleId>{SampleId("C")});

    p.medium.clear();
    const auto kept = training_filter(p);
    EXPECT_EQ(kept.positives.size() + kept.negatives.size(), 2u);
}

TEST(MakeSplit, TypicalSplitSizes) {
    std::set<SampleId> ids;
    for (const auto& id : synthetic_ids(10000)) ids.insert(id);
    const auto split = make_split(ids, 1000, 0.2, 42);
    EXPECT_EQ(split.test.size(), 1000u);
    EXPECT_EQ(split.validation.size(), 1800u);
    EXPECT_EQ(split.train.size(), 7200u);
    EXPECT_EQ(split.seed, 42u);
}

TEST(MakeSplit, RoundingRuleOnFiveSamples) {
    std::set<SampleId> ids;
    for (const auto& id : synthetic_ids(5)) ids.insert(id);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto split = make_split(ids, 1, 0.2, seed);
        EXPECT_EQ(split.test.size(), 1u);
        EXPECT_EQ(split.validation.size(), static_cast<std::size_t>(std::llround(0.2 * 4)));
        EXPECT_EQ(split.train.size(), 3u);
    }
}

TEST(MakeSplit, DeterministicAndPartitioning) {
    std::set<SampleId> ids;
    for (const auto& id : synthetic_ids(97)) ids.insert(id);
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t test = rng.index(90);
        const double fraction = rng.uniform(0.05, 0.5);
        const std::uint64_t seed = rng.next_u64();
        const auto a = make_split(ids, test, fraction, seed);
        const auto b = make_split(ids, test, fraction, seed);
        EXPECT_EQ(a.train, b.train);
        EXPECT_EQ(a.validation, b.validation);
        EXPECT_EQ(a.test, b.test);
        std::set<SampleId> all;
        all.insert(a.train.begin(), a.train.end());
        all.insert(a.validation.begin(), a.validation.end());
        all.insert(a.test.begin(), a.test.end());
        EXPECT_EQ(all, ids);
        EXPECT_EQ(a.train.size() + a.validation.size() + a.test.size(), ids.size());
    }
    EXPECT_NE(make_split(ids, 10, 0.2, 1).test, make_split(ids, 10, 0.2, 2).test);
}

TEST(MakeSplit, InfeasibleCountsRejected) {
    std::set<SampleId> ids;
    for (const auto& id : synthetic_ids(5)) ids.insert(id);
    EXPECT_THROW(make_split(ids, 5, 0.2, 0), std::invalid_argument);
    EXPECT_THROW(make_split(ids, 1, 0.0, 0), std::invalid_argument);
    EXPECT_THROW(make_split(ids, 1, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(make_split(ids, 3, 0.9, 0), std::invalid_argument);
}

TEST(ScheduleAnchorComparisons, RoundRobinOrder) {
    const auto anchors = quartile_anchors();
    const std::vector<SampleId> fresh{SampleId("a"), SampleId("b")};
    const auto pairs = schedule_anchor_comparisons(fresh, anchors, 2);
    ASSERT_EQ(pairs.size(), 8u);
    EXPECT_EQ(pairs[0], std::make_pair(SampleId("a"), SampleId("lo")));
    EXPECT_EQ(pairs[1], std::make_pair(SampleId("a"), SampleId("hi")));
    EXPECT_EQ(pairs[2], std::make_pair(SampleId("b"), SampleId("lo")));
    EXPECT_EQ(pairs[4], std::make_pair(SampleId("a"), SampleId("lo")));
    EXPECT_THROW(schedule_anchor_comparisons(fresh, anchors, 0), std::invalid_argument);
    const std::vector<SampleId> clash{SampleId("lo")};
    EXPECT_THROW(schedule_anchor_comparisons(clash, anchors, 1), std::invalid_argument);
}
