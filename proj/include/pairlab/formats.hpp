#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairlab/bt_core.hpp"
#include "pairlab/datasim.hpp"
#include "pairlab/fusion.hpp"
#include "pairlab/label_pipeline.hpp"

namespace pairlab {

/// Malformed input; `line()` is 1-based for JSONL inputs and 0 for whole documents.
class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, const std::string& message);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// "%.9g"
std::string format_number(double value);

/// Compact JSON with sorted object keys and every float printed with 9 significant digits,
/// so that identical values always serialize to identical bytes.
std::string dump_json(const nlohmann::json& value);

/// Parses a whole JSON document, reporting syntax errors as FormatError.
nlohmann::json parse_document(std::istream& in);

// Comparisons: {"left", "right", "winner": "left"|"right", "annotator", "ts"}. Unknown keys
// are ignored, so store files with bookkeeping fields remain valid input.
nlohmann::json comparison_to_json(const ComparisonRecord& record);
ComparisonRecord comparison_from_json(const nlohmann::json& j);
std::vector<ComparisonRecord> read_comparisons(std::istream& in);
void write_comparisons(std::ostream& out, std::span<const ComparisonRecord> records);

nlohmann::json scores_to_json(const RankingScores& scores);
RankingScores scores_from_json(const nlohmann::json& j);

nlohmann::json anchors_to_json(const AnchorSet& anchors);
AnchorSet anchors_from_json(const nlohmann::json& j);

// Labels: {"id", "score", "label"}
nlohmann::json labeled_to_json(const LabeledSample& sample);
std::vector<LabeledSample> read_labels(std::istream& in);
void write_labels(std::ostream& out, std::span<const LabeledSample> labels);

// Embeddings: {"id", "label": 0|1, "h_w": [...], "h_a": [...]}
std::vector<EmbeddingPair> read_embeddings(std::istream& in);
void write_embeddings(std::ostream& out, std::span<const EmbeddingPair> pairs);

// Model: {d_w, d_a, p, lambda, W_w, W_a, head_weights, head_bias}, matrices as row-major nested arrays.
nlohmann::json model_to_json(const FusionModel& model);
FusionModel model_from_json(const nlohmann::json& j);

nlohmann::json world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const nlohmann::json& j);

}  // namespace pairlab
