#include "ecorank/reranker.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

std::vector<std::string> render_all(const std::vector<std::string>& ids, const Catalog& catalog) {
    std::vector<std::string> texts;
    texts.reserve(ids.size());
    for (const std::string& id : ids) texts.push_back(render_item(catalog.at(id), true));
    return texts;
}

}  // namespace

double score_candidate(Scorer& scorer, const Session& session, const Item& candidate,
                       const Catalog& catalog) {
    if (session.interactions.empty())
        throw std::invalid_argument("score_candidate: empty session");
    const std::string candidate_text = render_item(candidate, true);
    double sum = 0.0;
    for (const std::string& id : session.interactions)
        sum += scorer.score_pair(render_item(catalog.at(id), true), candidate_text);
    return sum / static_cast<double>(session.interactions.size());
}

std::vector<double> score_candidates(Scorer& scorer, const Session& session,
                                     const CandidateSet& c_inp, const Catalog& catalog) {
    const std::vector<std::string> session_texts = render_all(session.interactions, catalog);
    const std::vector<std::string> candidate_texts = render_all(c_inp.candidates, catalog);
    const std::size_t n_session = session_texts.size();
    const std::size_t n_cand = candidate_texts.size();

    std::vector<TextPair> pairs;
    pairs.reserve(n_session * n_cand);
    for (std::size_t c = 0; c < n_cand; ++c)
        for (std::size_t s = 0; s < n_session; ++s)
            pairs.emplace_back(session_texts[s], candidate_texts[c]);

    const std::vector<double> pair_scores = scorer.score_pairs(pairs);

    std::vector<double> means(n_cand, 0.0);
    for (std::size_t c = 0; c < n_cand; ++c) {
        double sum = 0.0;
        for (std::size_t s = 0; s < n_session; ++s) sum += pair_scores[c * n_session + s];
        means[c] = sum / static_cast<double>(n_session);
    }
    return means;
}

std::vector<double> score_candidates_serial(Scorer& scorer, const Session& session,
                                            const CandidateSet& c_inp, const Catalog& catalog) {
    std::vector<double> means;
    means.reserve(c_inp.candidates.size());
    for (const std::string& id : c_inp.candidates)
        means.push_back(score_candidate(scorer, session, catalog.at(id), catalog));
    return means;
}

FilterResult select_top_k(const Session& session, const CandidateSet& c_inp,
                          const std::vector<double>& scores, std::size_t k_filter) {
    if (c_inp.candidates.size() < k_filter)
        throw std::invalid_argument("filter_candidates: candidate set smaller than k_filter");

    std::vector<std::size_t> order(c_inp.candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // ties: earlier input position wins
    });

    FilterResult result;
    result.filtered.session_id = c_inp.session_id;
    result.filtered.kind = CandidateKind::Filtered;
    result.filtered.candidates.reserve(k_filter);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::string& id = c_inp.candidates[order[rank]];
        if (rank < k_filter) result.filtered.candidates.push_back(id);
        if (id == session.target) {
            result.diagnostics.target_prefilter_rank = rank + 1;
            result.diagnostics.target_retained = rank < k_filter;
        }
    }
    return result;
}

FilterResult filter_candidates(Scorer& scorer, const Session& session,
                               const CandidateSet& c_inp, std::size_t k_filter,
                               const Catalog& catalog) {
    return select_top_k(session, c_inp, score_candidates(scorer, session, c_inp, catalog),
                        k_filter);
}

FilterResult filter_candidates_serial(Scorer& scorer, const Session& session,
                                      const CandidateSet& c_inp, std::size_t k_filter,
                                      const Catalog& catalog) {
    return select_top_k(session, c_inp,
                        score_candidates_serial(scorer, session, c_inp, catalog), k_filter);
}

std::vector<FilterResult> filter_sessions(Scorer& scorer, const std::vector<Session>& sessions,
                                          const std::vector<CandidateSet>& initial_sets,
                                          std::size_t k_filter, const Catalog& catalog) {
    if (sessions.size() != initial_sets.size())
        throw std::invalid_argument("filter_sessions: size mismatch");
    std::vector<FilterResult> results(sessions.size());
    const std::int64_t n = static_cast<std::int64_t>(sessions.size());
    if (scorer.thread_safe()) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(i);
            results[idx] =
                filter_candidates(scorer, sessions[idx], initial_sets[idx], k_filter, catalog);
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(i);
            results[idx] =
                filter_candidates(scorer, sessions[idx], initial_sets[idx], k_filter, catalog);
        }
    }
    return results;
}

}  // namespace ecorank
