#include "ecorank/ingest.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/rng.hpp"

namespace ecorank {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(SplitName name) {
    switch (name) {
        case SplitName::Train: return "train";
        case SplitName::Valid: return "valid";
        case SplitName::Test: return "test";
    }
    return "train";
}

namespace {

// Streams non-empty lines of a jsonl file through `fn(line_no, parsed)`.
// ordered_json keeps the file's field order (attribute order matters).
template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json parsed = ordered_json::parse(line, nullptr, false);
        if (parsed.is_discarded()) throw MalformedLine(line_no, "invalid JSON");
        fn(line_no, parsed);
    }
}

}  // namespace

Catalog load_catalog(const std::string& path) {
    Catalog catalog;
    for_each_json_line(path, [&](std::size_t line_no, const ordered_json& obj) {
        if (!obj.is_object()) throw MalformedLine(line_no, "expected an object");
        if (!obj.contains("id") || !obj["id"].is_string() || obj["id"].get<std::string>().empty())
            throw MalformedLine(line_no, "missing or empty \"id\"");
        if (!obj.contains("title") || !obj["title"].is_string() ||
            obj["title"].get<std::string>().empty())
            throw MalformedLine(line_no, "missing or empty \"title\"");

        Item item;
        item.id = obj["id"].get<std::string>();
        item.title = obj["title"].get<std::string>();
        item.category = obj.value("category", std::string{});
        if (obj.contains("attributes")) {
            const ordered_json& attrs = obj["attributes"];
            if (!attrs.is_object()) throw MalformedLine(line_no, "\"attributes\" must be an object");
            for (auto it = attrs.begin(); it != attrs.end(); ++it) {
                if (!it.value().is_string())
                    throw MalformedLine(line_no, "attribute values must be strings");
                item.attributes.emplace_back(it.key(), it.value().get<std::string>());
            }
        }
        if (obj.contains("sustainable")) {
            if (!obj["sustainable"].is_boolean())
                throw MalformedLine(line_no, "\"sustainable\" must be a boolean");
            item.sustainable = obj["sustainable"].get<bool>();
        }
        catalog.add(std::move(item));
    });
    return catalog;
}

std::vector<Session> load_sessions(const std::string& path, const Catalog& catalog) {
    std::vector<Session> sessions;
    std::unordered_set<std::string> seen_ids;
    for_each_json_line(path, [&](std::size_t line_no, const ordered_json& obj) {
        if (!obj.is_object()) throw MalformedLine(line_no, "expected an object");
        if (!obj.contains("session_id") || !obj["session_id"].is_string())
            throw MalformedLine(line_no, "missing \"session_id\"");
        if (!obj.contains("items") || !obj["items"].is_array())
            throw MalformedLine(line_no, "missing \"items\" array");
        if (!obj.contains("target") || !obj["target"].is_string())
            throw MalformedLine(line_no, "missing \"target\"");

        Session session;
        session.session_id = obj["session_id"].get<std::string>();
        if (!seen_ids.insert(session.session_id).second)
            throw DuplicateSession(session.session_id);
        for (const ordered_json& entry : obj["items"]) {
            if (!entry.is_string()) throw MalformedLine(line_no, "item ids must be strings");
            session.interactions.push_back(entry.get<std::string>());
        }
        session.target = obj["target"].get<std::string>();
        if (session.interactions.empty()) throw EmptySession(session.session_id);
        for (const std::string& id : session.interactions) {
            if (!catalog.contains(id)) throw UnknownItem(session.session_id, id);
        }
        if (!catalog.contains(session.target))
            throw UnknownItem(session.session_id, session.target);
        sessions.push_back(std::move(session));
    });
    return sessions;
}

DatasetSplit load_split(SplitName name, const std::string& path, const Catalog& catalog) {
    return DatasetSplit{name, load_sessions(path, catalog)};
}

CandidateSet sample_candidates(const Session& session, const Catalog& catalog,
                               std::size_t n_initial, std::uint64_t seed) {
    if (n_initial < 1 || catalog.size() < n_initial)
        throw CatalogTooSmall(catalog.size(), n_initial);

    Rng rng = Rng(seed).derive("sample").derive(session.session_id);

    // Pool of every id except the target, in catalog order.
    std::vector<std::size_t> pool;
    pool.reserve(catalog.size() - 1);
    const std::size_t target_pos = catalog.position_of(session.target);
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (i != target_pos) pool.push_back(i);
    }

    // Partial Fisher-Yates: the first n_initial-1 slots become a uniform
    // without-replacement draw.
    const std::size_t fillers = n_initial - 1;
    for (std::size_t i = 0; i < fillers; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }

    CandidateSet out;
    out.session_id = session.session_id;
    out.kind = CandidateKind::Initial;
    out.candidates.reserve(n_initial);
    for (std::size_t i = 0; i < fillers; ++i)
        out.candidates.push_back(catalog.items()[pool[i]].id);
    out.candidates.push_back(session.target);
    rng.shuffle(out.candidates);
    return out;
}

void append_candidate_set(std::string& buffer, const CandidateSet& set) {
    json obj;
    obj["session_id"] = set.session_id;
    obj["candidates"] = set.candidates;
    obj["kind"] = to_string(set.kind);
    buffer += obj.dump();
    buffer += '\n';
}

std::vector<CandidateSet> load_candidate_sets(const std::string& path) {
    std::vector<CandidateSet> sets;
    for_each_json_line(path, [&](std::size_t line_no, const ordered_json& obj) {
        if (!obj.is_object() || !obj.contains("session_id") || !obj.contains("candidates") ||
            !obj.contains("kind"))
            throw MalformedLine(line_no, "expected session_id/candidates/kind");
        CandidateSet set;
        set.session_id = obj["session_id"].get<std::string>();
        for (const ordered_json& entry : obj["candidates"])
            set.candidates.push_back(entry.get<std::string>());
        set.kind = candidate_kind_from_string(obj["kind"].get<std::string>());
        sets.push_back(std::move(set));
    });
    return sets;
}

}  // namespace ecorank
