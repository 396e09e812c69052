#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecorank/domain.hpp"

namespace ecorank {

// 1 iff the target sits within the top k of the ranking.
double hr_at_k(const RankedList& ranked, const std::string& target, std::size_t k);

// Single-relevant-item NDCG: 1/log2(rank+1) when rank <= k, else 0.
// The ideal DCG is 1, so HR@1 == NDCG@1 on every session.
double ndcg_at_k(const RankedList& ranked, const std::string& target, std::size_t k);

// Fraction of the top k that carries the sustainability flag. k <= |ranked|.
double green_share_at_k(const RankedList& ranked, const Catalog& catalog, std::size_t k);

// Defensive audit: throws std::invalid_argument unless `ranked.order` is a
// permutation of `candidate_ids`.
void assert_permutation(const RankedList& ranked, const std::vector<std::string>& candidate_ids);

// One evaluated session, ready for aggregation.
struct SessionResult {
    std::string session_id;
    std::size_t target_rank = 0;  // 1-based; 0 = absent from the ranking
    bool target_in_candidates = false;
    bool failed = false;    // backend failure, scored 0 everywhere
    bool repaired = false;
    bool sustainable_target = false;
    std::map<std::size_t, double> hr;
    std::map<std::size_t, double> ndcg;
    std::map<std::size_t, double> green_share;
};

SessionResult score_session(const RankedList& ranked, const std::string& target,
                            const Catalog& catalog, const std::vector<std::size_t>& cutoffs,
                            bool target_in_candidates);

// A session lost to stage-1 filtering or a backend failure: zero at every
// cutoff, still part of every denominator.
SessionResult zero_session(const std::string& session_id, const Catalog& catalog,
                           const std::string& target,
                           const std::vector<std::size_t>& cutoffs, bool failed);

struct CutoffStats {
    double hr = 0.0;
    double ndcg = 0.0;
};

struct MetricsReport {
    std::size_t n_sessions = 0;
    double target_retention_rate = 0.0;
    double failure_rate = 0.0;
    std::map<std::size_t, CutoffStats> cutoffs;
    std::map<std::size_t, double> green_share;

    // Restricted to sessions whose target is sustainable; absent when the
    // evaluation saw none (omitted, not zero).
    struct GreenTarget {
        std::size_t n_sessions = 0;
        std::map<std::size_t, CutoffStats> cutoffs;
    };
    std::optional<GreenTarget> green_target;
};

MetricsReport aggregate(const std::vector<SessionResult>& rows,
                        const std::vector<std::size_t>& cutoffs);

std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

std::string session_result_to_json(const SessionResult& row);

}  // namespace ecorank
