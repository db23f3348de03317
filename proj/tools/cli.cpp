#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "pairlab/bt_core.hpp"
#include "pairlab/datasim.hpp"
#include "pairlab/formats.hpp"
#include "pairlab/fusion.hpp"
#include "pairlab/label_pipeline.hpp"
#include "pairlab/metrics.hpp"
#include "pairlab/random.hpp"
#include "pairlab/service.hpp"

#include <httplib.h>

namespace pairlab::cli {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

void write_output(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& body) {
    if (path.empty() || path == "-") {
        body(fallback);
        return;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    body(file);
    if (!file) throw std::runtime_error("write to '" + path + "' failed");
}

void add_fit_flags(CLI::App* cmd, FitConfig& fit) {
    cmd->add_option("--scale", fit.scale, "Logistic scale used while fitting")->capture_default_str();
    cmd->add_option("--prior-stddev", fit.prior_stddev, "Width of the Gaussian score prior")->capture_default_str();
    cmd->add_option("--max-iter", fit.max_iterations, "Iteration cap")->capture_default_str();
    cmd->add_option("--tol", fit.gradient_tolerance, "Gradient infinity-norm tolerance")->capture_default_str();
}

/// Replaces embedding labels by the high (1) / low (0) groups of a labels file; medium and
/// unlabeled samples are dropped.
std::vector<EmbeddingPair> apply_label_file(std::vector<EmbeddingPair> pairs, const std::string& labels_path) {
    auto in = open_input(labels_path);
    const auto labels = read_labels(in);
    const auto groups = training_filter(partition_groups(labels, 2));
    std::vector<EmbeddingPair> kept;
    for (auto& p : pairs) {
        if (groups.positives.count(p.id)) {
            p.label = 1;
        } else if (groups.negatives.count(p.id)) {
            p.label = 0;
        } else {
            continue;
        }
        kept.push_back(std::move(p));
    }
    return kept;
}

std::vector<EmbeddingPair> load_embeddings(const std::string& path, const std::string& labels_path) {
    auto in = open_input(path);
    auto pairs = read_embeddings(in);
    if (!labels_path.empty()) pairs = apply_label_file(std::move(pairs), labels_path);
    return pairs;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pairwise-comparison ranking, anchor labeling and orthogonal-fusion classification"};
    app.require_subcommand(1);
    std::function<int()> action;

    // fit
    std::string fit_in;
    std::string fit_out;
    std::string fit_session;
    FitConfig fit_config;
    auto* fit = app.add_subcommand("fit", "Fit MAP ranking scores to a comparisons JSONL file");
    fit->add_option("input,--in", fit_in, "Comparisons JSONL")->required();
    fit->add_option("-o,--out", fit_out, "Scores JSON (default stdout)");
    fit->add_option("--session", fit_session, "Only use store lines of this session");
    add_fit_flags(fit, fit_config);
    fit->callback([&] {
        action = [&] {
            std::vector<ComparisonRecord> records;
            if (fit_session.empty()) {
                auto in = open_input(fit_in);
                records = read_comparisons(in);
            } else {
                records = JudgmentStore::replay(fit_in, fit_session);
            }
            if (records.empty()) throw std::invalid_argument("no comparisons in '" + fit_in + "'");
            const auto scores = fit_map(canonical_order(records), fit_config);
            write_output(fit_out, out, [&](std::ostream& os) { os << dump_json(scores_to_json(scores)) << '\n'; });
            if (!scores.converged) {
                err << "warning: not converged after " << scores.iterations << " iterations\n";
                return kExitNotConverged;
            }
            return kExitOk;
        };
    });

    // anchors
    std::string anchors_in;
    std::string anchors_out;
    std::vector<double> percentiles = kDefaultPercentiles;
    auto* anchors_cmd = app.add_subcommand("anchors", "Select percentile anchors from fitted scores");
    anchors_cmd->add_option("input,--in", anchors_in, "Scores JSON")->required();
    anchors_cmd->add_option("--percentiles", percentiles, "Comma-separated percentiles")
        ->delimiter(',')
        ->capture_default_str();
    anchors_cmd->add_option("-o,--out", anchors_out, "Anchors JSON (default stdout)");
    anchors_cmd->callback([&] {
        action = [&] {
            auto in = open_input(anchors_in);
            const auto scores = scores_from_json(parse_document(in));
            const auto anchors = select_anchors(scores, percentiles);
            write_output(anchors_out, out, [&](std::ostream& os) { os << dump_json(anchors_to_json(anchors)) << '\n'; });
            return kExitOk;
        };
    });

    // label
    std::string label_in;
    std::string label_anchors;
    std::string label_out;
    FitConfig label_config;
    auto* label = app.add_subcommand("label", "Label new samples from their anchor comparisons");
    label->add_option("input,--in", label_in, "Anchor-comparison JSONL")->required();
    label->add_option("--anchors", label_anchors, "Anchors JSON")->required();
    label->add_option("-o,--out", label_out, "Labels JSONL (default stdout)");
    add_fit_flags(label, label_config);
    label->callback([&] {
        action = [&] {
            auto anchors_stream = open_input(label_anchors);
            const auto anchors = anchors_from_json(parse_document(anchors_stream));
            auto in = open_input(label_in);
            const auto records = read_comparisons(in);
            const auto labels = label_all(records, anchors, label_config);
            write_output(label_out, out, [&](std::ostream& os) { write_labels(os, labels); });
            return kExitOk;
        };
    });

    // train
    std::string train_embeddings;
    std::string train_labels;
    std::string train_out;
    std::string train_mode = "orth";
    TrainConfig train_config;
    auto* train_cmd = app.add_subcommand("train", "Train the fusion classifier");
    train_cmd->add_option("--embeddings", train_embeddings, "Embeddings JSONL")->required();
    train_cmd->add_option("--labels", train_labels, "Labels JSONL; keeps high (1) and low (0), drops medium");
    train_cmd->add_option("--mode", train_mode, "concat or orth")
        ->check(CLI::IsMember({"concat", "orth"}))
        ->capture_default_str();
    train_cmd->add_option("--lambda", train_config.lambda, "Orthogonality penalty weight")->capture_default_str();
    train_cmd->add_option("--proj-dim", train_config.projection_dim, "Projection dimension")->capture_default_str();
    train_cmd->add_option("--lr", train_config.learning_rate, "Learning rate")->capture_default_str();
    train_cmd->add_option("--epochs", train_config.epochs, "Epochs")->capture_default_str();
    train_cmd->add_option("--batch", train_config.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--seed", train_config.seed, "Seed for initialization and shuffling")->capture_default_str();
    train_cmd->add_option("--init-scale", train_config.init_scale, "Uniform init half-width")->capture_default_str();
    train_cmd->add_option("-o,--out", train_out, "Model JSON (default stdout)");
    train_cmd->callback([&] {
        action = [&] {
            train_config.mode = train_mode == "concat" ? FusionMode::Concat : FusionMode::Orth;
            const auto data = load_embeddings(train_embeddings, train_labels);
            const auto model = train(data, train_config);
            write_output(train_out, out, [&](std::ostream& os) { os << dump_json(model_to_json(model)) << '\n'; });
            return kExitOk;
        };
    });

    // eval
    std::string eval_model;
    std::string eval_embeddings;
    std::string eval_labels;
    std::string eval_out;
    auto* eval = app.add_subcommand("eval", "Accuracy and macro F1 of a model on an embeddings file");
    eval->add_option("--model", eval_model, "Model JSON")->required();
    eval->add_option("--embeddings", eval_embeddings, "Embeddings JSONL")->required();
    eval->add_option("--labels", eval_labels, "Labels JSONL; keeps high (1) and low (0), drops medium");
    eval->add_option("-o,--out", eval_out, "Metrics JSON (default stdout)");
    eval->callback([&] {
        action = [&] {
            auto model_stream = open_input(eval_model);
            const auto model = model_from_json(parse_document(model_stream));
            const auto data = load_embeddings(eval_embeddings, eval_labels);
            if (data.empty()) throw std::invalid_argument("no samples to evaluate");
            std::vector<int> predicted;
            std::vector<int> actual;
            for (const auto& p : data) {
                predicted.push_back(predict(model, p));
                actual.push_back(p.label);
            }
            const json metrics{{"accuracy", accuracy(predicted, actual)},
                               {"macro_f1", macro_f1(predicted, actual, 2)},
                               {"mean_orth_penalty", mean_orth_penalty(model, data)},
                               {"count", data.size()}};
            write_output(eval_out, out, [&](std::ostream& os) { os << dump_json(metrics) << '\n'; });
            return kExitOk;
        };
    });

    // split
    std::string split_embeddings;
    std::string split_labels;
    std::string split_dir;
    std::size_t split_test = 0;
    double split_fraction = 0.2;
    std::uint64_t split_seed = 0;
    auto* split = app.add_subcommand("split", "Test / validation / train partition of an embeddings file");
    split->add_option("--embeddings", split_embeddings, "Embeddings JSONL")->required();
    split->add_option("--labels", split_labels, "Labels JSONL; medium samples are dropped first");
    split->add_option("--test-count", split_test, "Number of test samples")->required();
    split->add_option("--val-fraction", split_fraction, "Validation share of the non-test rest")->capture_default_str();
    split->add_option("--seed", split_seed, "Split seed")->capture_default_str();
    split->add_option("--out-dir", split_dir, "Directory for train/validation/test JSONL")->required();
    split->callback([&] {
        action = [&] {
            const auto data = load_embeddings(split_embeddings, split_labels);
            std::set<SampleId> ids;
            for (const auto& p : data) {
                if (!ids.insert(p.id).second) throw std::invalid_argument("duplicate embedding id '" + p.id.str() + "'");
            }
            const auto parts = make_split(ids, split_test, split_fraction, split_seed);
            std::filesystem::create_directories(split_dir);
            auto dump_part = [&](const char* name, const std::set<SampleId>& members) {
                std::vector<EmbeddingPair> subset;
                for (const auto& p : data) {
                    if (members.count(p.id)) subset.push_back(p);
                }
                write_output((std::filesystem::path(split_dir) / name).string(), out,
                             [&](std::ostream& os) { write_embeddings(os, subset); });
            };
            dump_part("train.jsonl", parts.train);
            dump_part("validation.jsonl", parts.validation);
            dump_part("test.jsonl", parts.test);
            out << dump_json({{"train", parts.train.size()},
                              {"validation", parts.validation.size()},
                              {"test", parts.test.size()},
                              {"seed", parts.seed}})
                << '\n';
            return kExitOk;
        };
    });

    // simulate
    std::size_t sim_n = 100;
    std::size_t sim_pps = 30;
    int sim_repeats = 1;
    std::uint64_t sim_seed = 0;
    double sim_scale = kDefaultJudgmentScale;
    std::string sim_out;
    std::string sim_truth;
    auto* simulate = app.add_subcommand("simulate", "Synthetic ground truth and Bradley-Terry judgments");
    simulate->add_option("--n", sim_n, "Number of samples")->capture_default_str();
    simulate->add_option("--pairs-per-sample", sim_pps, "Random opponents drawn per sample")->capture_default_str();
    simulate->add_option("--repeats", sim_repeats, "Judgments per pair")->capture_default_str();
    simulate->add_option("--seed", sim_seed, "Seed")->capture_default_str();
    simulate->add_option("--judgment-scale", sim_scale, "Logistic scale of simulated judges")->capture_default_str();
    simulate->add_option("-o,--out", sim_out, "Comparisons JSONL (default stdout)");
    simulate->add_option("--truth", sim_truth, "Ground-truth JSON");
    simulate->callback([&] {
        action = [&] {
            const auto world = gen_true_scores(sim_n, sim_seed, sim_scale);
            const auto pairs = random_pairs(world_ids(world), sim_pps, mix_seed(sim_seed, 1));
            const auto records = sample_comparisons(world, pairs, sim_repeats, mix_seed(sim_seed, 2));
            write_output(sim_out, out, [&](std::ostream& os) { write_comparisons(os, records); });
            if (!sim_truth.empty()) {
                write_output(sim_truth, out, [&](std::ostream& os) { os << dump_json(world_to_json(world)) << '\n'; });
            }
            return kExitOk;
        };
    });

    // simulate-label
    std::string siml_truth;
    std::string siml_anchors;
    int siml_repeats = kDefaultAnchorRepeats;
    std::uint64_t siml_seed = 0;
    std::string siml_out;
    auto* simulate_label =
        app.add_subcommand("simulate-label", "Simulated anchor comparisons for every non-anchor sample of a world");
    simulate_label->add_option("--truth", siml_truth, "Ground-truth JSON")->required();
    simulate_label->add_option("--anchors", siml_anchors, "Anchors JSON")->required();
    simulate_label->add_option("--repeats", siml_repeats, "Comparisons per (sample, anchor)")->capture_default_str();
    simulate_label->add_option("--seed", siml_seed, "Seed")->capture_default_str();
    simulate_label->add_option("-o,--out", siml_out, "Comparisons JSONL (default stdout)");
    simulate_label->callback([&] {
        action = [&] {
            auto truth_stream = open_input(siml_truth);
            const auto world = world_from_json(parse_document(truth_stream));
            auto anchors_stream = open_input(siml_anchors);
            const auto anchors = anchors_from_json(parse_document(anchors_stream));
            std::vector<SampleId> fresh;
            for (const auto& [id, s] : world.true_scores) {
                if (anchors.find(id) == nullptr) fresh.push_back(id);
            }
            for (const auto& a : anchors.anchors()) {
                if (!world.true_scores.count(a.sample)) {
                    throw std::invalid_argument("anchor '" + a.sample.str() + "' is not in the ground truth");
                }
            }
            const auto pairs = schedule_anchor_comparisons(fresh, anchors, siml_repeats);
            const auto records = sample_comparisons(world, pairs, 1, siml_seed);
            write_output(siml_out, out, [&](std::ostream& os) { write_comparisons(os, records); });
            return kExitOk;
        };
    });

    // simulate-embeddings
    std::size_t sime_n = 200;
    std::string sime_labels;
    int sime_dw = 8;
    int sime_da = 8;
    double sime_iw = 0.7;
    double sime_ia = 0.7;
    double sime_noise = 1.0;
    std::uint64_t sime_seed = 0;
    std::string sime_out;
    auto* simulate_emb =
        app.add_subcommand("simulate-embeddings", "Synthetic embeddings with complementary modality signal");
    simulate_emb->add_option("--n", sime_n, "Number of samples (alternating labels) when --labels is absent")
        ->capture_default_str();
    simulate_emb->add_option("--labels", sime_labels, "Labels JSONL; high -> 1, low -> 0, medium dropped");
    simulate_emb->add_option("--d-w", sime_dw, "Semantic dimension")->capture_default_str();
    simulate_emb->add_option("--d-a", sime_da, "Acoustic dimension")->capture_default_str();
    simulate_emb->add_option("--informative-w", sime_iw, "Semantic signal strength")->capture_default_str();
    simulate_emb->add_option("--informative-a", sime_ia, "Acoustic signal strength")->capture_default_str();
    simulate_emb->add_option("--noise", sime_noise, "Noise scale")->capture_default_str();
    simulate_emb->add_option("--seed", sime_seed, "Seed")->capture_default_str();
    simulate_emb->add_option("-o,--out", sime_out, "Embeddings JSONL (default stdout)");
    simulate_emb->callback([&] {
        action = [&] {
            std::vector<std::pair<SampleId, int>> labels;
            if (sime_labels.empty()) {
                const auto ids = synthetic_ids(sime_n);
                for (std::size_t i = 0; i < ids.size(); ++i) labels.emplace_back(ids[i], static_cast<int>(i % 2));
            } else {
                auto in = open_input(sime_labels);
                const auto groups = training_filter(partition_groups(read_labels(in), 2));
                for (const auto& id : groups.negatives) labels.emplace_back(id, 0);
                for (const auto& id : groups.positives) labels.emplace_back(id, 1);
                std::sort(labels.begin(), labels.end());
            }
            const auto pairs = gen_embeddings(labels, sime_dw, sime_da, sime_iw, sime_ia, sime_noise, sime_seed);
            write_output(sime_out, out, [&](std::ostream& os) { write_embeddings(os, pairs); });
            return kExitOk;
        };
    });

    // serve
    std::string serve_manifest;
    std::string serve_store;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    std::string serve_phase = "anchor";
    std::string serve_anchors;
    int serve_repeats = kDefaultAnchorRepeats;
    std::size_t serve_pps = 10;
    std::uint64_t serve_seed = 0;
    FitConfig serve_fit;
    auto* serve = app.add_subcommand("serve", "Run the HTTP annotation service");
    serve->add_option("--manifest", serve_manifest, "Sample manifest JSONL")->required();
    serve->add_option("--store", serve_store, "Judgment log (PAIRLAB_STORE overrides)");
    serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
    serve->add_option("--port", serve_port, "Port")->capture_default_str();
    serve->add_option("--phase", serve_phase, "Default session phase: anchor or label")
        ->check(CLI::IsMember({"anchor", "label"}))
        ->capture_default_str();
    serve->add_option("--anchors", serve_anchors, "Anchors JSON for label-phase sessions");
    serve->add_option("--repeats", serve_repeats, "Label-phase repeats per anchor")->capture_default_str();
    serve->add_option("--pairs-per-sample", serve_pps, "Anchor-phase opponents per sample")->capture_default_str();
    serve->add_option("--seed", serve_seed, "Scheduling seed")->capture_default_str();
    add_fit_flags(serve, serve_fit);
    serve->callback([&] {
        action = [&] {
            if (const char* env = std::getenv("PAIRLAB_STORE"); env != nullptr && *env != '\0') serve_store = env;
            if (serve_store.empty()) throw std::invalid_argument("--store (or PAIRLAB_STORE) is required");
            ServiceOptions options;
            auto manifest_stream = open_input(serve_manifest);
            options.manifest = SampleManifest::read(manifest_stream);
            options.store_path = serve_store;
            options.default_phase = serve_phase == "label" ? Phase::Label : Phase::Anchor;
            if (!serve_anchors.empty()) {
                auto anchors_stream = open_input(serve_anchors);
                options.anchors = anchors_from_json(parse_document(anchors_stream));
            }
            options.repeats = serve_repeats;
            options.pairs_per_sample = serve_pps;
            options.seed = serve_seed;
            options.fit = serve_fit;
            AnnotationService service(std::move(options));
            httplib::Server server;
            service.mount(server);
            out << "listening on " << serve_host << ':' << serve_port << std::endl;
            if (!server.listen(serve_host, serve_port)) throw std::runtime_error("cannot bind the HTTP port");
            return kExitOk;
        };
    });

    std::vector<const char*> argv{"pairlab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try {
        return action();
    } catch (const FormatError& e) {
        err << "error: malformed input: " << e.what() << '\n';
    } catch (const UnsupportedConfiguration& e) {
        err << "error: unsupported configuration: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitInputError;
}

}  // namespace pairlab::cli
