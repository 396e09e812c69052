#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecorank/domain.hpp"

namespace ecorank {

enum class SplitName { Train, Valid, Test };

struct DatasetSplit {
    SplitName name = SplitName::Train;
    std::vector<Session> sessions;
};

const char* to_string(SplitName name);

// catalog.jsonl: one object per line with fields
//   id (string, required), title (string, required), category (string),
//   attributes (object of string->string, optional), sustainable (bool, default false).
// Insertion order is preserved. Throws MalformedLine / DuplicateId.
Catalog load_catalog(const std::string& path);

// sessions.jsonl: {"session_id":..., "items":[ids...], "target": id}.
// Every id must resolve in the catalog. Throws MalformedLine / UnknownItem /
// EmptySession / DuplicateSession.
std::vector<Session> load_sessions(const std::string& path, const Catalog& catalog);

DatasetSplit load_split(SplitName name, const std::string& path, const Catalog& catalog);

// Draws an Initial candidate set of n_initial distinct ids that always
// contains the session target. The n_initial-1 fillers are sampled without
// replacement from catalog \ {target} on a stream keyed by (seed, session_id),
// then the whole set is shuffled so the target position is uniform.
CandidateSet sample_candidates(const Session& session, const Catalog& catalog,
                               std::size_t n_initial, std::uint64_t seed);

// candidates.jsonl persistence: {"session_id":..., "candidates":[...], "kind":"initial"|"filtered"}
void append_candidate_set(std::string& buffer, const CandidateSet& set);
std::vector<CandidateSet> load_candidate_sets(const std::string& path);

}  // namespace ecorank
