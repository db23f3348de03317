// Acceptance run: one PASS/FAIL line per primary criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "invariants.hpp"
#include "oracles.hpp"
#include "pairlab/bt_core.hpp"
#include "pairlab/datasim.hpp"
#include "pairlab/formats.hpp"
#include "pairlab/fusion.hpp"
#include "pairlab/label_pipeline.hpp"
#include "pairlab/metrics.hpp"
#include "pairlab/random.hpp"
#include "pairlab/service.hpp"

#include <httplib.h>

using namespace pairlab;
using namespace pairlab::testing;
using nlohmann::json;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d, e);
    return buf;
}

// ---------------------------------------------------------------- 1

Verdict oracle_equivalence() {
    std::ifstream in(std::string(PAIRLAB_FIXTURES) + "/small_instances.jsonl");
    if (!in) return {false, "fixture corpus missing"};
    constexpr double kBounds = 1.5;
    constexpr double kStep = 0.01;
    int instances = 0;
    double worst = 0.0;
    std::string worst_name;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        std::vector<ComparisonRecord> records;
        for (const auto& r : j.at("records")) records.push_back(comparison_from_json(r));
        std::set<SampleId> ids;
        for (const auto& r : records) ids.insert({r.left, r.right});
        if (ids.size() > 3 || records.size() > 6) continue;
        ++instances;
        const auto fit = fit_map(records);
        if (!fit.converged) return {false, j.at("name").get<std::string>() + " did not converge"};
        const auto grid = oracle_map_grid(records, kBounds, kStep);
        for (const auto& [id, v] : grid) {
            if (std::abs(v) >= kBounds - kStep) return {false, j.at("name").get<std::string>() + ": optimum on grid edge"};
            const double diff = std::abs(fit.scores.at(id) - v);
            if (diff > worst) {
                worst = diff;
                worst_name = j.at("name").get<std::string>();
            }
        }
    }
    Verdict v;
    v.pass = instances >= 50 && worst <= 1e-2;
    v.detail = fmt("%.0f instances, max |fit - grid| = %.4f", instances, worst) + " (" + worst_name + ")";
    return v;
}

// ---------------------------------------------------------------- 2

Verdict gradient_checks() {
    constexpr double kTol = 1e-4;
    double worst_bt = 0.0;
    double worst_fusion = 0.0;
    Rng rng(20240601);
    int bt_instances = 0;
    for (int trial = 0; trial < 25; ++trial, ++bt_instances) {
        const int n = 2 + static_cast<int>(rng.index(9));
        const auto records = random_instance(n, n + static_cast<int>(rng.index(15)), rng.next_u64());
        ScoreMap scores;
        for (int i = 0; i < n; ++i) scores.emplace(SampleId("k" + std::to_string(i)), rng.normal());
        std::vector<double> x;
        for (const auto& [id, v] : scores) x.push_back(v);
        const auto analytic = log_posterior_gradient(scores, records, {});
        const auto numeric = central_difference(
            [&](const std::vector<double>& v) {
                ScoreMap m;
                std::size_t i = 0;
                for (const auto& [id, old] : scores) m.emplace(id, v[i++]);
                return log_posterior(m, records, {});
            },
            x, 1e-5);
        std::size_t i = 0;
        for (const auto& [id, g] : analytic) worst_bt = std::max(worst_bt, relative_error(g, numeric[i++]));
    }
    int fusion_instances = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed, ++fusion_instances) {
        auto model = random_model(3, 3, 2, 0.1 + 0.1 * static_cast<double>(seed % 10), 500 + seed);
        const auto batch = random_batch(4, 3, 3, 900 + seed);
        const auto analytic = flatten(loss_gradient(model, batch));
        auto params = parameters(model);
        std::vector<double> x;
        for (double* p : params) x.push_back(*p);
        const auto numeric = central_difference(
            [&](const std::vector<double>& v) {
                for (std::size_t k = 0; k < v.size(); ++k) *params[k] = v[k];
                return reference_fusion_loss(model, batch);
            },
            x, 1e-5);
        for (std::size_t k = 0; k < analytic.size(); ++k) {
            worst_fusion = std::max(worst_fusion, relative_error(analytic[k], numeric[k]));
        }
    }
    Verdict v;
    v.pass = worst_bt < kTol && worst_fusion < kTol && bt_instances >= 20 && fusion_instances >= 20;
    v.detail = fmt("%.0f posterior instances max rel err %.2e, %.0f fusion instances max rel err %.2e", bt_instances,
                   worst_bt, fusion_instances, worst_fusion);
    return v;
}

// ---------------------------------------------------------------- 3

double recovery_tau(std::size_t pairs_per_sample, std::uint64_t seed) {
    const auto world = gen_true_scores(100, seed);
    const auto pairs = random_pairs(world_ids(world), pairs_per_sample, mix_seed(seed, 1));
    const auto records = sample_comparisons(world, pairs, 1, mix_seed(seed, 2));
    const auto fit = fit_map(canonical_order(records));
    return kendall_tau(fit.scores, world.true_scores);
}

Verdict score_recovery() {
    double tau30 = 0.0;
    double tau100 = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        tau30 += recovery_tau(30, seed) / 5.0;
        tau100 += recovery_tau(100, seed) / 5.0;
    }
    return {tau30 >= 0.85 && tau100 >= 0.95,
            fmt("mean tau %.4f at 30 pairs/sample (need 0.85), %.4f at 100 (need 0.95); judgment scale %.2f", tau30,
                tau100, kDefaultJudgmentScale)};
}

// ---------------------------------------------------------------- 4

Verdict label_calibration() {
    constexpr std::uint64_t kSeed = 7;
    const auto world = gen_true_scores(1002, kSeed);
    FitConfig config;
    config.prior_stddev = 1.0 / world.judgment_scale;
    config.max_iterations = 5000;

    const auto seed_pairs = random_pairs(world_ids(world), 200, mix_seed(kSeed, 1));
    const auto seed_records = sample_comparisons(world, seed_pairs, 1, mix_seed(kSeed, 2));
    const auto fitted = fit_map(canonical_order(seed_records), config);
    if (!fitted.converged) return {false, "seed fit did not converge"};
    const auto anchors = select_anchors(fitted, kDefaultPercentiles);

    std::vector<SampleId> fresh;
    for (const auto& [id, s] : world.true_scores) {
        if (anchors.find(id) == nullptr) fresh.push_back(id);
    }
    const auto pairs = schedule_anchor_comparisons(fresh, anchors, 20);
    const auto records = sample_comparisons(world, pairs, 1, mix_seed(kSeed, 3));
    const auto labels = label_all(records, anchors, config);
    const auto groups = partition_groups(labels, 2);
    const double n = static_cast<double>(labels.size());
    const double low = 100.0 * groups.low.size() / n;
    const double medium = 100.0 * groups.medium.size() / n;
    const double high = 100.0 * groups.high.size() / n;
    Verdict v;
    v.pass = labels.size() == 1000 && std::abs(low - 25.0) <= 5.0 && std::abs(medium - 50.0) <= 5.0 &&
             std::abs(high - 25.0) <= 5.0;
    v.detail = fmt("%.0f labeled, low/medium/high = %.1f/%.1f/%.1f%%", n, low, medium, high);
    return v;
}

// ---------------------------------------------------------------- 5

struct FusionRun {
    double concat_acc = 0, orth_acc = 0, semantic_acc = 0, acoustic_acc = 0;
    double concat_penalty = 0, orth_penalty = 0;
    int degenerate = 0;
};

double test_accuracy(const FusionModel& model, std::span<const EmbeddingPair> data) {
    int hits = 0;
    for (const auto& p : data) hits += predict(model, p) == p.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

FusionRun fusion_run(std::uint64_t seed) {
    constexpr std::size_t kSamples = 1500;
    constexpr std::size_t kTest = 500;
    std::vector<std::pair<SampleId, int>> labels;
    const auto ids = synthetic_ids(kSamples);
    for (std::size_t i = 0; i < kSamples; ++i) labels.emplace_back(ids[i], static_cast<int>(i % 2));
    const auto data = gen_embeddings(labels, 8, 8, 0.7, 0.7, 1.0, mix_seed(seed, 1));

    const auto split = make_split(std::set<SampleId>(ids.begin(), ids.end()), kTest, 0.2, mix_seed(seed, 2));
    std::vector<EmbeddingPair> train_set;
    std::vector<EmbeddingPair> test_set;
    for (const auto& p : data) {
        if (split.test.count(p.id)) {
            test_set.push_back(p);
        } else if (split.train.count(p.id)) {
            train_set.push_back(p);
        }
    }

    TrainConfig concat;
    concat.mode = FusionMode::Concat;
    concat.projection_dim = 16;
    concat.seed = mix_seed(seed, 3);
    TrainConfig orth = concat;
    orth.mode = FusionMode::Orth;
    orth.lambda = 0.1;

    FusionRun r;
    const auto concat_model = train(train_set, concat);
    const auto orth_model = train(train_set, orth);
    r.concat_acc = test_accuracy(concat_model, test_set);
    r.orth_acc = test_accuracy(orth_model, test_set);
    r.concat_penalty = mean_orth_penalty(concat_model, train_set);
    r.orth_penalty = mean_orth_penalty(orth_model, train_set);
    // A collapsed projection would zero the penalty without decorrelating anything.
    for (const auto& p : train_set) {
        const double nv = (orth_model.semantic_projection * p.semantic).norm();
        const double nu = (orth_model.acoustic_projection * p.acoustic).norm();
        r.degenerate += (nv < 1e-3 || nu < 1e-3) ? 1 : 0;
    }
    for (const auto keep : {Modality::SemanticOnly, Modality::AcousticOnly}) {
        const auto probe_train = restrict_modality(train_set, keep);
        const auto probe_test = restrict_modality(test_set, keep);
        const double acc = test_accuracy(train(probe_train, concat), probe_test);
        (keep == Modality::SemanticOnly ? r.semantic_acc : r.acoustic_acc) = acc;
    }
    return r;
}

Verdict fusion_direction() {
    FusionRun mean;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = fusion_run(seed);
        mean.concat_acc += r.concat_acc / 5;
        mean.orth_acc += r.orth_acc / 5;
        mean.semantic_acc += r.semantic_acc / 5;
        mean.acoustic_acc += r.acoustic_acc / 5;
        mean.concat_penalty += r.concat_penalty / 5;
        mean.orth_penalty += r.orth_penalty / 5;
        mean.degenerate += r.degenerate;
    }
    Verdict v;
    v.pass = mean.concat_acc >= mean.semantic_acc + 0.05 && mean.concat_acc >= mean.acoustic_acc + 0.05 &&
             mean.orth_acc >= mean.concat_acc - 0.02 && mean.orth_penalty < 0.1 &&
             mean.orth_penalty < mean.concat_penalty && mean.degenerate == 0;
    v.detail = fmt("acc semantic %.3f, acoustic %.3f, concat %.3f, orth %.3f;", mean.semantic_acc, mean.acoustic_acc,
                   mean.concat_acc, mean.orth_acc) +
               fmt(" penalty concat %.4f, orth %.4f; %.0f collapsed projections", mean.concat_penalty, mean.orth_penalty,
                   mean.degenerate);
    return v;
}

// ---------------------------------------------------------------- 6

Verdict invariant_suite() {
    Verdict v;
    int passed = 0;
    const auto results = run_invariant_suite(20240601);
    for (const auto& r : results) {
        if (r.ok) {
            ++passed;
        } else {
            v.pass = false;
            v.detail += r.name + " failed: " + r.detail + "; ";
        }
    }
    v.detail += fmt("%.0f/%.0f properties hold", passed, static_cast<double>(results.size()));
    return v;
}

// ---------------------------------------------------------------- 7

int cli_call(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << "pairlab " << args.front() << ": " << err.str();
    return code;
}

std::vector<ComparisonRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    return read_comparisons(in);
}

/// Drives one session over HTTP with exactly the pairs and winners of `records`.
std::string replay_over_http(httplib::Client& client, json session_body, const std::vector<ComparisonRecord>& records) {
    json pairs = json::array();
    for (const auto& r : records) pairs.push_back({r.left.str(), r.right.str()});
    session_body["pairs"] = pairs;
    auto created = client.Post("/sessions", session_body.dump(), "application/json");
    if (!created || created->status != 201) throw std::runtime_error("session creation failed");
    const std::string id = json::parse(created->body)["session_id"];
    for (const auto& r : records) {
        auto next = client.Get("/sessions/" + id + "/next-pair");
        if (!next || next->status != 200) throw std::runtime_error("next-pair failed");
        const auto view = json::parse(next->body);
        if (view["left"]["id"] != r.left.str() || view["right"]["id"] != r.right.str()) {
            throw std::runtime_error("service issued an unexpected pair");
        }
        const json judgment{{"left", r.left.str()},
                            {"right", r.right.str()},
                            {"winner", r.winner == Winner::Left ? "left" : "right"},
                            {"annotator", r.annotator},
                            {"sequence", view["sequence"]}};
        auto posted = client.Post("/sessions/" + id + "/judgments", judgment.dump(), "application/json");
        if (!posted || posted->status != 200) throw std::runtime_error("judgment rejected");
    }
    return id;
}

Verdict cli_api_equivalence() {
    TempDir dir;
    auto path = [&](const char* name) { return (dir / name).string(); };
    if (cli_call({"simulate", "--n", "60", "--pairs-per-sample", "10", "--seed", "11", "-o", path("c.jsonl"),
                  "--truth", path("truth.json")}) != 0 ||
        cli_call({"fit", path("c.jsonl"), "-o", path("s.json")}) != 0 ||
        cli_call({"anchors", path("s.json"), "-o", path("a.json")}) != 0 ||
        cli_call({"simulate-label", "--truth", path("truth.json"), "--anchors", path("a.json"), "--seed", "12", "-o",
                  path("lc.jsonl")}) != 0 ||
        cli_call({"label", path("lc.jsonl"), "--anchors", path("a.json"), "-o", path("l.jsonl")}) != 0) {
        return {false, "batch CLI pipeline failed"};
    }

    std::ifstream anchors_in(path("a.json"));
    ServiceOptions options;
    options.store_path = dir / "store.jsonl";
    options.anchors = anchors_from_json(parse_document(anchors_in));
    std::vector<ManifestEntry> entries;
    for (const auto& id : synthetic_ids(60)) entries.push_back({id, id.str() + ".wav", ""});
    options.manifest = SampleManifest(std::move(entries));

    AnnotationService service(std::move(options));
    httplib::Server server;
    service.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    Verdict v;
    try {
        auto seed_records = read_records(dir / "c.jsonl");
        std::vector<std::string> all_ids;
        for (const auto& id : synthetic_ids(60)) all_ids.push_back(id.str());
        const auto anchor_session = replay_over_http(client, {{"phase", "anchor"}, {"sample_ids", all_ids}}, seed_records);
        const std::string api_scores = client.Get("/sessions/" + anchor_session + "/scores")->body + "\n";
        const std::string cli_scores = read_file(dir / "s.json");

        Rng rng(5);
        rng.shuffle(seed_records);
        const auto shuffled_session =
            replay_over_http(client, {{"phase", "anchor"}, {"sample_ids", all_ids}}, seed_records);
        const std::string shuffled_scores = client.Get("/sessions/" + shuffled_session + "/scores")->body + "\n";

        const auto label_records = read_records(dir / "lc.jsonl");
        std::ifstream a_in(path("a.json"));
        const auto anchor_set = anchors_from_json(parse_document(a_in));
        std::set<std::string> fresh;
        for (const auto& r : label_records) {
            fresh.insert(r.left.str());
            fresh.insert(r.right.str());
        }
        for (const auto& a : anchor_set.anchors()) fresh.erase(a.sample.str());
        const auto label_session = replay_over_http(
            client, {{"phase", "label"}, {"new_sample_ids", std::vector<std::string>(fresh.begin(), fresh.end())}},
            label_records);
        const auto api_labels = json::parse(client.Get("/sessions/" + label_session + "/labels")->body)["labels"];
        std::string api_label_lines;
        for (const auto& l : api_labels) api_label_lines += dump_json(l) + "\n";
        const std::string cli_labels = read_file(dir / "l.jsonl");

        if (cli_call({"fit", (dir / "store.jsonl").string(), "--session", anchor_session, "-o", path("replay.json")}) != 0) {
            throw std::runtime_error("fit of the replayed store failed");
        }
        const std::string replayed_scores = read_file(dir / "replay.json");

        v.pass = api_scores == cli_scores && shuffled_scores == cli_scores && api_labels.size() == fresh.size() &&
                 api_label_lines == cli_labels && replayed_scores == cli_scores;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu judgments: scores %s, shuffled arrival %s, store replay %s; %zu labels %s",
                      seed_records.size(), api_scores == cli_scores ? "identical" : "DIFFER",
                      shuffled_scores == cli_scores ? "identical" : "DIFFER",
                      replayed_scores == cli_scores ? "identical" : "DIFFER", static_cast<std::size_t>(api_labels.size()),
                      api_label_lines == cli_labels ? "identical" : "DIFFER");
        v.detail = buf;
    } catch (const std::exception& e) {
        v = {false, e.what()};
    }
    server.stop();
    listener.join();
    return v;
}

struct Criterion {
    int number;
    const char* name;
    double budget_seconds;
    std::function<Verdict()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "oracle equivalence on small instances", 10.0, oracle_equivalence},
        {2, "gradient checks against central differences", 5.0, gradient_checks},
        {3, "score recovery (Kendall tau)", 30.0, score_recovery},
        {4, "label-pipeline calibration 25/50/25", 60.0, label_calibration},
        {5, "fusion direction: unimodal < concat <= orth", 120.0, fusion_direction},
        {6, "invariant suite", 60.0, invariant_suite},
        {7, "CLI/API equivalence", 60.0, cli_api_equivalence},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool within_budget = seconds < c.budget_seconds;
        const bool pass = v.pass && within_budget;
        failures += pass ? 0 : 1;
        std::printf("criterion %d %s: %s | %s | %.2fs of %.0fs\n", c.number, pass ? "PASS" : "FAIL", c.name,
                    v.detail.c_str(), seconds, c.budget_seconds);
        std::fflush(stdout);
    }
    std::printf("%s: %d of %zu criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
