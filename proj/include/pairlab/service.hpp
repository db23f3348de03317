#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairlab/bt_core.hpp"
#include "pairlab/label_pipeline.hpp"

namespace httplib {
class Server;
}

namespace pairlab {

struct ManifestEntry {
    SampleId id;
    std::string media_locator;
    std::string transcript;
};

/// Samples presentable to annotators, keyed by id.
class SampleManifest {
public:
    SampleManifest() = default;
    explicit SampleManifest(std::vector<ManifestEntry> entries);

    /// JSONL lines {"id", "media_locator", "transcript"}; throws FormatError.
    static SampleManifest read(std::istream& in);

    const ManifestEntry* find(const SampleId& id) const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<SampleId, ManifestEntry> entries_;
};

/// Append-only JSONL judgment log. Each append is written and fsync'd before returning, so an
/// acknowledged judgment survives a crash. Lines carry the comparison schema plus the
/// bookkeeping keys "session" and "seq".
class JudgmentStore {
public:
    explicit JudgmentStore(std::filesystem::path path);
    ~JudgmentStore();
    JudgmentStore(const JudgmentStore&) = delete;
    JudgmentStore& operator=(const JudgmentStore&) = delete;

    void append(const ComparisonRecord& record, const std::string& session, std::size_t sequence);
    const std::filesystem::path& path() const noexcept { return path_; }

    /// Records of one session in log order (all records when `session` is empty).
    static std::vector<ComparisonRecord> replay(const std::filesystem::path& path, const std::string& session = {});

private:
    std::filesystem::path path_;
    int fd_ = -1;
    std::mutex mutex_;
};

enum class Phase { Anchor, Label };

struct ServiceOptions {
    std::filesystem::path store_path;
    SampleManifest manifest;
    std::optional<AnchorSet> anchors;  ///< required for label-phase sessions
    Phase default_phase = Phase::Anchor;
    int repeats = kDefaultAnchorRepeats;
    std::size_t pairs_per_sample = 10;
    FitConfig fit;
    std::uint64_t seed = 0;
};

/// HTTP-agnostic result: status code plus JSON body.
struct Response {
    int status = 200;
    nlohmann::json body;
};

/// Two-phase pairwise annotation workflow.
///
/// Anchor phase: uniformly random pairs among a seed set (or all pairs when `exhaustive`).
/// Label phase: (new sample, anchor) pairs, round-robin over new samples, `repeats` times.
/// Generated pairs get a seeded random left/right presentation; explicit `pairs` in the
/// session request are issued verbatim. Sessions live in memory; judgments go to the store.
class AnnotationService {
public:
    explicit AnnotationService(ServiceOptions options);
    ~AnnotationService();

    Response create_session(const nlohmann::json& body);
    Response next_pair(const std::string& session_id);
    Response submit_judgment(const std::string& session_id, const nlohmann::json& body);
    Response scores(const std::string& session_id);
    Response labels(const std::string& session_id);

    /// Registers the REST routes on `server`.
    void mount(httplib::Server& server);

private:
    struct Session;

    std::shared_ptr<Session> find(const std::string& session_id);
    nlohmann::json describe(const SampleId& id) const;

    ServiceOptions options_;
    JudgmentStore store_;
    std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t session_counter_ = 0;
};

}  // namespace pairlab
