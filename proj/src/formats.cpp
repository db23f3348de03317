#include "pairlab/formats.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pairlab {

using nlohmann::json;

FormatError::FormatError(std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

std::string format_number(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("cannot serialize a non-finite number");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

namespace {

void dump_into(const json& v, std::string& out) {
    switch (v.type()) {
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [key, item] : v.items()) {
                if (!first) out += ',';
                first = false;
                out += json(key).dump();
                out += ':';
                dump_into(item, out);
            }
            out += '}';
            break;
        }
        case json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i > 0) out += ',';
                dump_into(v[i], out);
            }
            out += ']';
            break;
        }
        case json::value_t::number_float:
            out += format_number(v.get<double>());
            break;
        default:
            out += v.dump();
    }
}

const json& field(const json& j, const char* key) {
    if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
    auto it = j.find(key);
    if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
    return *it;
}

std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double number_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("field '") + key + "' must be finite");
    return x;
}

long integer_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number_integer()) throw std::invalid_argument(std::string("field '") + key + "' must be an integer");
    return v.get<long>();
}

Eigen::VectorXd vector_from(const json& v, const char* what) {
    if (!v.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw std::invalid_argument(std::string(what) + " must hold numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    if (!out.allFinite()) throw std::invalid_argument(std::string(what) + " must be finite");
    return out;
}

Eigen::MatrixXd matrix_from(const json& v, const char* what) {
    if (!v.is_array() || v.empty()) throw std::invalid_argument(std::string(what) + " must be a nonempty array");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto first = vector_from(v[0], what);
    Eigen::MatrixXd out(rows, first.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = vector_from(v[static_cast<std::size_t>(r)], what);
        if (row.size() != out.cols()) throw std::invalid_argument(std::string(what) + " rows differ in length");
        out.row(r) = row.transpose();
    }
    return out;
}

json vector_to(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json matrix_to(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to(m.row(r).transpose()));
    return out;
}

template <typename Parse>
void for_each_line(std::istream& in, Parse parse) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            parse(json::parse(line));
        } catch (const json::exception& e) {
            throw FormatError(number, e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError(number, e.what());
        }
    }
}

template <typename T>
T document(const json& j, T (*convert)(const json&)) {
    try {
        return convert(j);
    } catch (const json::exception& e) {
        throw FormatError(0, e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(0, e.what());
    }
}

}  // namespace

std::string dump_json(const json& value) {
    std::string out;
    dump_into(value, out);
    return out;
}

json parse_document(std::istream& in) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return json::parse(buffer.str());
    } catch (const json::exception& e) {
        throw FormatError(0, e.what());
    }
}

json comparison_to_json(const ComparisonRecord& record) {
    return {{"left", record.left.str()},
            {"right", record.right.str()},
            {"winner", record.winner == Winner::Left ? "left" : "right"},
            {"annotator", record.annotator},
            {"ts", format_timestamp(record.timestamp)}};
}

ComparisonRecord comparison_from_json(const json& j) {
    const auto winner = string_field(j, "winner");
    if (winner != "left" && winner != "right") throw std::invalid_argument("winner must be \"left\" or \"right\"");
    ComparisonRecord r{SampleId(string_field(j, "left")), SampleId(string_field(j, "right")),
                       winner == "left" ? Winner::Left : Winner::Right, "", Timestamp{}};
    if (j.contains("annotator")) r.annotator = string_field(j, "annotator");
    if (j.contains("ts")) r.timestamp = parse_timestamp(string_field(j, "ts"));
    validate_record(r);
    return r;
}

std::vector<ComparisonRecord> read_comparisons(std::istream& in) {
    std::vector<ComparisonRecord> out;
    for_each_line(in, [&](const json& j) { out.push_back(comparison_from_json(j)); });
    return out;
}

void write_comparisons(std::ostream& out, std::span<const ComparisonRecord> records) {
    for (const auto& r : records) out << dump_json(comparison_to_json(r)) << '\n';
}

json scores_to_json(const RankingScores& scores) {
    json map = json::object();
    for (const auto& [id, a] : scores.scores) map[id.str()] = a;
    return {{"scores", map}, {"sigma", scores.sigma}, {"converged", scores.converged},
            {"iterations", scores.iterations}};
}

RankingScores scores_from_json(const json& j) {
    return document<RankingScores>(j, [](const json& doc) {
        RankingScores out;
        const auto& map = field(doc, "scores");
        if (!map.is_object()) throw std::invalid_argument("'scores' must be an object");
        for (const auto& [key, value] : map.items()) {
            if (!value.is_number()) throw std::invalid_argument("score of '" + key + "' must be a number");
            out.scores.emplace(SampleId(key), value.get<double>());
        }
        out.sigma = doc.contains("sigma") ? number_field(doc, "sigma") : population_stddev(out.scores);
        out.converged = doc.contains("converged") && doc.at("converged").is_boolean() && doc.at("converged").get<bool>();
        out.iterations = doc.contains("iterations") ? static_cast<int>(integer_field(doc, "iterations")) : 0;
        return out;
    });
}

json anchors_to_json(const AnchorSet& anchors) {
    json list = json::array();
    for (const auto& a : anchors.anchors()) {
        list.push_back({{"id", a.sample.str()}, {"score", a.score}, {"percentile", a.percentile}});
    }
    return {{"anchors", list}};
}

AnchorSet anchors_from_json(const json& j) {
    return document<AnchorSet>(j, [](const json& doc) {
        const auto& list = field(doc, "anchors");
        if (!list.is_array()) throw std::invalid_argument("'anchors' must be an array");
        std::vector<Anchor> anchors;
        for (const auto& item : list) {
            anchors.push_back({SampleId(string_field(item, "id")), number_field(item, "score"),
                               number_field(item, "percentile")});
        }
        return AnchorSet(std::move(anchors));
    });
}

json labeled_to_json(const LabeledSample& sample) {
    return {{"id", sample.sample.str()}, {"score", sample.score}, {"label", sample.label}};
}

std::vector<LabeledSample> read_labels(std::istream& in) {
    std::vector<LabeledSample> out;
    for_each_line(in, [&](const json& j) {
        out.push_back({SampleId(string_field(j, "id")), j.contains("score") ? number_field(j, "score") : 0.0,
                       static_cast<int>(integer_field(j, "label"))});
    });
    return out;
}

void write_labels(std::ostream& out, std::span<const LabeledSample> labels) {
    for (const auto& s : labels) out << dump_json(labeled_to_json(s)) << '\n';
}

std::vector<EmbeddingPair> read_embeddings(std::istream& in) {
    std::vector<EmbeddingPair> out;
    for_each_line(in, [&](const json& j) {
        const auto label = integer_field(j, "label");
        if (label != 0 && label != 1) throw std::invalid_argument("embedding label must be 0 or 1");
        EmbeddingPair pair{SampleId(string_field(j, "id")), vector_from(field(j, "h_w"), "h_w"),
                           vector_from(field(j, "h_a"), "h_a"), static_cast<int>(label)};
        if (!out.empty() && (pair.semantic.size() != out.front().semantic.size() ||
                             pair.acoustic.size() != out.front().acoustic.size())) {
            throw std::invalid_argument("embedding dimensions differ from the first line");
        }
        out.push_back(std::move(pair));
    });
    return out;
}

void write_embeddings(std::ostream& out, std::span<const EmbeddingPair> pairs) {
    for (const auto& p : pairs) {
        out << dump_json({{"id", p.id.str()}, {"label", p.label}, {"h_w", vector_to(p.semantic)},
                          {"h_a", vector_to(p.acoustic)}})
            << '\n';
    }
}

json model_to_json(const FusionModel& model) {
    return {{"d_w", model.semantic_dim()},
            {"d_a", model.acoustic_dim()},
            {"p", model.projection_dim()},
            {"lambda", model.lambda},
            {"W_w", matrix_to(model.semantic_projection)},
            {"W_a", matrix_to(model.acoustic_projection)},
            {"head_weights", matrix_to(model.head_weights)},
            {"head_bias", vector_to(model.head_bias)}};
}

FusionModel model_from_json(const json& j) {
    return document<FusionModel>(j, [](const json& doc) {
        FusionModel m;
        m.semantic_projection = matrix_from(field(doc, "W_w"), "W_w");
        m.acoustic_projection = matrix_from(field(doc, "W_a"), "W_a");
        m.head_weights = matrix_from(field(doc, "head_weights"), "head_weights");
        const auto bias = vector_from(field(doc, "head_bias"), "head_bias");
        if (bias.size() != 2) throw std::invalid_argument("head_bias must have 2 entries");
        m.head_bias = bias;
        m.lambda = number_field(doc, "lambda");
        if (integer_field(doc, "d_w") != m.semantic_dim() || integer_field(doc, "d_a") != m.acoustic_dim() ||
            integer_field(doc, "p") != m.projection_dim()) {
            throw std::invalid_argument("declared dimensions do not match the matrices");
        }
        m.validate();
        return m;
    });
}

json world_to_json(const SyntheticWorld& world) {
    json map = json::object();
    for (const auto& [id, s] : world.true_scores) map[id.str()] = s;
    return {{"true_scores", map}, {"judgment_scale", world.judgment_scale}, {"seed", world.seed}};
}

SyntheticWorld world_from_json(const json& j) {
    return document<SyntheticWorld>(j, [](const json& doc) {
        SyntheticWorld world;
        const auto& map = field(doc, "true_scores");
        if (!map.is_object()) throw std::invalid_argument("'true_scores' must be an object");
        for (const auto& [key, value] : map.items()) {
            if (!value.is_number()) throw std::invalid_argument("true score of '" + key + "' must be a number");
            world.true_scores.emplace(SampleId(key), value.get<double>());
        }
        world.judgment_scale = number_field(doc, "judgment_scale");
        if (!(world.judgment_scale > 0.0)) throw std::invalid_argument("judgment_scale must be positive");
        if (doc.contains("seed")) world.seed = field(doc, "seed").get<std::uint64_t>();
        return world;
    });
}

}  // namespace pairlab
