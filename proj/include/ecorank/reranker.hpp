#pragma once

#include <cstdint>
#include <vector>

#include "ecorank/domain.hpp"
#include "ecorank/scorer.hpp"

namespace ecorank {

struct FilterDiagnostics {
    bool target_retained = false;
    std::size_t target_prefilter_rank = 0;  // 1-based rank among all initial candidates
};

struct FilterResult {
    CandidateSet filtered;
    FilterDiagnostics diagnostics;
};

// Mean of score_pair(s, candidate) over every session item s.
double score_candidate(Scorer& scorer, const Session& session, const Item& candidate,
                       const Catalog& catalog);

// Relevance of every candidate against the whole session: one batched
// score_pairs call (candidate-major pair order), then a fixed-order mean
// per candidate so results do not depend on scheduling.
std::vector<double> score_candidates(Scorer& scorer, const Session& session,
                                     const CandidateSet& c_inp, const Catalog& catalog);

// Serial reference path: one score_pair call per (session item, candidate),
// no batching. Kept for equivalence tests and the benchmark.
std::vector<double> score_candidates_serial(Scorer& scorer, const Session& session,
                                            const CandidateSet& c_inp, const Catalog& catalog);

// Keeps the k_filter highest-scoring candidates, sorted descending by score
// with ties broken by ascending position in c_inp. Diagnostics report the
// target's pre-filter rank and whether it survived; the target gets no
// special treatment.
FilterResult filter_candidates(Scorer& scorer, const Session& session,
                               const CandidateSet& c_inp, std::size_t k_filter,
                               const Catalog& catalog);

FilterResult filter_candidates_serial(Scorer& scorer, const Session& session,
                                      const CandidateSet& c_inp, std::size_t k_filter,
                                      const Catalog& catalog);

// Pure selection step, shared by both paths: takes precomputed per-candidate
// scores and applies the top-k rule.
FilterResult select_top_k(const Session& session, const CandidateSet& c_inp,
                          const std::vector<double>& scores, std::size_t k_filter);

// Filters a whole split. Sessions fan out across OpenMP threads when the
// scorer is thread-safe; output order always matches input order.
std::vector<FilterResult> filter_sessions(Scorer& scorer, const std::vector<Session>& sessions,
                                          const std::vector<CandidateSet>& initial_sets,
                                          std::size_t k_filter, const Catalog& catalog);

}  // namespace ecorank
