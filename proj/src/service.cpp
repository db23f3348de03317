#include "pairlab/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>

#include "pairlab/datasim.hpp"
#include "pairlab/formats.hpp"
#include "pairlab/random.hpp"

#include <httplib.h>

namespace pairlab {

using nlohmann::json;

namespace {

Response error(int status, const std::string& code, const std::string& message) {
    return {status, {{"code", code}, {"message", message}}};
}

std::vector<SampleId> id_list(const json& body, const char* key) {
    std::vector<SampleId> ids;
    const auto& list = body.at(key);
    if (!list.is_array()) throw std::invalid_argument(std::string("'") + key + "' must be an array of ids");
    std::set<SampleId> seen;
    for (const auto& item : list) {
        if (!item.is_string()) throw std::invalid_argument(std::string("'") + key + "' must hold strings");
        SampleId id(item.get<std::string>());
        if (!seen.insert(id).second) throw std::invalid_argument("duplicate sample id '" + id.str() + "'");
        ids.push_back(std::move(id));
    }
    return ids;
}

std::string json_string(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body.at(key).is_string()) {
        throw std::invalid_argument(std::string("field '") + key + "' must be a string");
    }
    return body.at(key).get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------- manifest

SampleManifest::SampleManifest(std::vector<ManifestEntry> entries) {
    for (auto& e : entries) {
        const SampleId id = e.id;
        if (!entries_.emplace(id, std::move(e)).second) {
            throw std::invalid_argument("duplicate manifest id '" + id.str() + "'");
        }
    }
}

SampleManifest SampleManifest::read(std::istream& in) {
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            entries.push_back({SampleId(json_string(j, "id")),
                               j.contains("media_locator") ? json_string(j, "media_locator") : "",
                               j.contains("transcript") ? json_string(j, "transcript") : ""});
        } catch (const json::exception& e) {
            throw FormatError(number, e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError(number, e.what());
        }
    }
    try {
        return SampleManifest(std::move(entries));
    } catch (const std::invalid_argument& e) {
        throw FormatError(0, e.what());
    }
}

const ManifestEntry* SampleManifest::find(const SampleId& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------- store

JudgmentStore::JudgmentStore(std::filesystem::path path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw std::runtime_error("cannot open judgment store " + path_.string() + ": " + std::strerror(errno));
    }
}

JudgmentStore::~JudgmentStore() {
    if (fd_ >= 0) ::close(fd_);
}

void JudgmentStore::append(const ComparisonRecord& record, const std::string& session, std::size_t sequence) {
    json line = comparison_to_json(record);
    line["session"] = session;
    line["seq"] = sequence;
    const std::string text = dump_json(line) + "\n";

    std::lock_guard lock(mutex_);
    std::size_t written = 0;
    while (written < text.size()) {
        const auto n = ::write(fd_, text.data() + written, text.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error("append to judgment store failed: " + std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw std::runtime_error("fsync of judgment store failed");
}

std::vector<ComparisonRecord> JudgmentStore::replay(const std::filesystem::path& path, const std::string& session) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read judgment store " + path.string());
    std::vector<ComparisonRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            if (!session.empty() && !(j.contains("session") && j.at("session") == session)) continue;
            out.push_back(comparison_from_json(j));
        } catch (const json::exception& e) {
            throw FormatError(number, e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError(number, e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------- service

struct AnnotationService::Session {
    std::string id;
    Phase phase = Phase::Anchor;
    std::vector<SampleId> samples;
    std::vector<SamplePair> schedule;
    std::size_t next = 0;
    bool issued = false;  ///< front of the queue has been handed out by next-pair
    std::vector<ComparisonRecord> records;
    std::mutex mutex;
};

AnnotationService::AnnotationService(ServiceOptions options)
    : options_(std::move(options)), store_(options_.store_path) {
    options_.fit.validate();
    if (options_.repeats < 1) throw std::invalid_argument("repeats must be at least 1");
}

AnnotationService::~AnnotationService() = default;

std::shared_ptr<AnnotationService::Session> AnnotationService::find(const std::string& session_id) {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    return it == sessions_.end() ? nullptr : it->second;
}

json AnnotationService::describe(const SampleId& id) const {
    const auto* entry = options_.manifest.find(id);
    return {{"id", id.str()},
            {"media_locator", entry ? entry->media_locator : ""},
            {"transcript", entry ? entry->transcript : ""}};
}

Response AnnotationService::create_session(const json& body) {
    try {
        if (!body.is_object()) throw std::invalid_argument("request body must be a JSON object");
        Phase phase = options_.default_phase;
        if (body.contains("phase")) {
            const auto name = json_string(body, "phase");
            if (name == "anchor" || name == "AnchorPhase") {
                phase = Phase::Anchor;
            } else if (name == "label" || name == "LabelPhase") {
                phase = Phase::Label;
            } else {
                throw std::invalid_argument("unknown phase '" + name + "'");
            }
        }
        if (phase == Phase::Label && !options_.anchors) {
            return error(400, "invalid_argument", "label-phase sessions need the service to be started with anchors");
        }

        auto session = std::make_shared<Session>();
        session->phase = phase;
        const char* key = phase == Phase::Label && body.contains("new_sample_ids") ? "new_sample_ids" : "sample_ids";
        if (!body.contains(key)) throw std::invalid_argument(std::string("missing '") + key + "'");
        session->samples = id_list(body, key);
        for (const auto& id : session->samples) {
            if (options_.manifest.find(id) == nullptr) {
                throw std::invalid_argument("sample '" + id.str() + "' is not in the manifest");
            }
            if (phase == Phase::Label && options_.anchors->find(id) != nullptr) {
                throw std::invalid_argument("'" + id.str() + "' is an anchor and cannot be labeled");
            }
        }
        if (phase == Phase::Label) {
            for (const auto& a : options_.anchors->anchors()) {
                if (options_.manifest.find(a.sample) == nullptr) {
                    throw std::invalid_argument("anchor '" + a.sample.str() + "' is not in the manifest");
                }
            }
        }

        std::uint64_t number = 0;
        {
            std::unique_lock lock(sessions_mutex_);
            number = ++session_counter_;
        }
        session->id = "session-" + std::to_string(number);
        Rng rng(mix_seed(options_.seed, number));

        const std::set<SampleId> members(session->samples.begin(), session->samples.end());
        if (body.contains("pairs")) {
            for (const auto& item : body.at("pairs")) {
                if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string()) {
                    throw std::invalid_argument("'pairs' must be a list of [left, right] id pairs");
                }
                SampleId left(item[0].get<std::string>());
                SampleId right(item[1].get<std::string>());
                if (left == right) throw std::invalid_argument("pair compares '" + left.str() + "' with itself");
                if (phase == Phase::Anchor) {
                    if (!members.count(left) || !members.count(right)) {
                        throw std::invalid_argument("pair " + left.str() + "/" + right.str() + " leaves the seed set");
                    }
                } else {
                    const bool left_anchor = options_.anchors->find(left) != nullptr;
                    const bool right_anchor = options_.anchors->find(right) != nullptr;
                    const SampleId& other = left_anchor ? right : left;
                    if (left_anchor == right_anchor || !members.count(other)) {
                        throw std::invalid_argument("pair " + left.str() + "/" + right.str() +
                                                    " must match a session sample with an anchor");
                    }
                }
                session->schedule.emplace_back(std::move(left), std::move(right));
            }
        } else {
            if (phase == Phase::Anchor) {
                const bool exhaustive = body.value("exhaustive", false);
                const auto per_sample = body.value("pairs_per_sample", options_.pairs_per_sample);
                if (session->samples.size() >= 2) {
                    session->schedule = exhaustive
                                            ? exhaustive_pairs(session->samples)
                                            : random_pairs(session->samples, per_sample, rng.next_u64());
                }
            } else {
                const int repeats = body.value("repeats", options_.repeats);
                session->schedule = schedule_anchor_comparisons(session->samples, *options_.anchors, repeats);
            }
            for (auto& pair : session->schedule) {
                if (rng.uniform() < 0.5) std::swap(pair.first, pair.second);
            }
        }

        const std::string id = session->id;
        {
            std::unique_lock lock(sessions_mutex_);
            sessions_.emplace(id, std::move(session));
        }
        return {201, {{"session_id", id}}};
    } catch (const json::exception& e) {
        return error(400, "invalid_argument", e.what());
    } catch (const std::invalid_argument& e) {
        return error(400, "invalid_argument", e.what());
    }
}

Response AnnotationService::next_pair(const std::string& session_id) {
    auto session = find(session_id);
    if (!session) return error(404, "not_found", "unknown session '" + session_id + "'");
    std::lock_guard lock(session->mutex);
    if (session->next >= session->schedule.size()) return {204, nullptr};
    session->issued = true;
    const auto& [left, right] = session->schedule[session->next];
    return {200,
            {{"left", describe(left)},
             {"right", describe(right)},
             {"remaining", session->schedule.size() - session->next},
             {"sequence", session->next}}};
}

Response AnnotationService::submit_judgment(const std::string& session_id, const json& body) {
    auto session = find(session_id);
    if (!session) return error(404, "not_found", "unknown session '" + session_id + "'");

    ComparisonRecord record{SampleId("?"), SampleId("?"), Winner::Left, "", now_utc()};
    std::optional<std::size_t> sequence;
    try {
        record.left = SampleId(json_string(body, "left"));
        record.right = SampleId(json_string(body, "right"));
        const auto winner = json_string(body, "winner");
        if (winner == "left") {
            record.winner = Winner::Left;
        } else if (winner == "right") {
            record.winner = Winner::Right;
        } else {
            throw std::invalid_argument("winner must be \"left\" or \"right\"");
        }
        if (body.contains("annotator")) record.annotator = json_string(body, "annotator");
        if (body.contains("sequence")) {
            if (!body.at("sequence").is_number_unsigned()) {
                throw std::invalid_argument("sequence must be a non-negative integer");
            }
            sequence = body.at("sequence").get<std::size_t>();
        }
    } catch (const std::invalid_argument& e) {
        return error(400, "invalid_argument", e.what());
    }

    std::lock_guard lock(session->mutex);
    auto matches = [&](std::size_t at) {
        return at < session->schedule.size() && session->schedule[at].first == record.left &&
               session->schedule[at].second == record.right;
    };
    if (sequence && *sequence < session->next) {
        if (matches(*sequence)) return {200, {{"accepted", true}, {"duplicate", true}}};
        return error(409, "conflict", "judgment does not match the pair issued at that sequence");
    }
    if (session->next >= session->schedule.size()) return error(409, "conflict", "session has no pending pair");
    if (!session->issued) return error(409, "conflict", "the pending pair has not been issued by next-pair");
    if ((sequence && *sequence != session->next) || !matches(session->next)) {
        return error(409, "conflict", "judgment does not match the issued pair");
    }

    store_.append(record, session->id, session->next);
    session->records.push_back(std::move(record));
    ++session->next;
    session->issued = false;
    return {200, {{"accepted", true}}};
}

Response AnnotationService::scores(const std::string& session_id) {
    auto session = find(session_id);
    if (!session) return error(404, "not_found", "unknown session '" + session_id + "'");
    std::vector<ComparisonRecord> records;
    {
        std::lock_guard lock(session->mutex);
        records = session->records;
    }
    if (records.empty()) return {200, scores_to_json(RankingScores{})};
    return {200, scores_to_json(fit_map(canonical_order(records), options_.fit))};
}

Response AnnotationService::labels(const std::string& session_id) {
    auto session = find(session_id);
    if (!session) return error(404, "not_found", "unknown session '" + session_id + "'");
    if (session->phase != Phase::Label) return error(409, "wrong_phase", "labels exist only for label-phase sessions");
    std::vector<ComparisonRecord> records;
    {
        std::lock_guard lock(session->mutex);
        records = session->records;
    }
    json list = json::array();
    for (const auto& s : label_all(records, *options_.anchors, options_.fit, true)) list.push_back(labeled_to_json(s));
    return {200, {{"labels", list}, {"anchors", anchors_to_json(*options_.anchors).at("anchors")}}};
}

void AnnotationService::mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        if (r.status != 204) res.set_content(dump_json(r.body), "application/json");
    };
    auto parse_body = [](const httplib::Request& req) { return json::parse(req.body.empty() ? "{}" : req.body); };

    server.Post("/sessions", [this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
        try {
            send(res, create_session(parse_body(req)));
        } catch (const json::exception& e) {
            send(res, error(400, "invalid_json", e.what()));
        }
    });
    server.Get(R"(/sessions/([^/]+)/next-pair)", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, next_pair(req.matches[1]));
    });
    server.Post(R"(/sessions/([^/]+)/judgments)",
                [this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
                    try {
                        send(res, submit_judgment(req.matches[1], parse_body(req)));
                    } catch (const json::exception& e) {
                        send(res, error(400, "invalid_json", e.what()));
                    }
                });
    server.Get(R"(/sessions/([^/]+)/scores)", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, scores(req.matches[1]));
    });
    server.Get(R"(/sessions/([^/]+)/labels)", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, labels(req.matches[1]));
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send(res, error(500, "internal", e.what()));
        }
    });
}

}  // namespace pairlab
