#include "ecorank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

using nlohmann::json;

double hr_at_k(const RankedList& ranked, const std::string& target, std::size_t k) {
    if (k < 1) throw std::invalid_argument("hr_at_k: k must be >= 1");
    const std::size_t rank = ranked.rank_of(target);
    return (rank >= 1 && rank <= k) ? 1.0 : 0.0;
}

double ndcg_at_k(const RankedList& ranked, const std::string& target, std::size_t k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    const std::size_t rank = ranked.rank_of(target);
    if (rank < 1 || rank > k) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double green_share_at_k(const RankedList& ranked, const Catalog& catalog, std::size_t k) {
    if (k > ranked.order.size())
        throw std::invalid_argument("green_share_at_k: k exceeds ranking length");
    if (k == 0) return 0.0;
    std::size_t green = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (catalog.at(ranked.order[i]).sustainable) ++green;
    return static_cast<double>(green) / static_cast<double>(k);
}

void assert_permutation(const RankedList& ranked,
                        const std::vector<std::string>& candidate_ids) {
    if (ranked.order.size() != candidate_ids.size())
        throw std::invalid_argument("ranking length != candidate count");
    std::vector<std::string> a = ranked.order;
    std::vector<std::string> b = candidate_ids;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::invalid_argument("ranking is not a permutation of the candidates");
    for (std::size_t i = 1; i < a.size(); ++i)
        if (a[i] == a[i - 1])
            throw std::invalid_argument("duplicate id in ranking: " + a[i]);
}

SessionResult score_session(const RankedList& ranked, const std::string& target,
                            const Catalog& catalog, const std::vector<std::size_t>& cutoffs,
                            bool target_in_candidates) {
    SessionResult row;
    row.session_id = ranked.session_id;
    row.target_rank = ranked.rank_of(target);
    row.target_in_candidates = target_in_candidates;
    row.repaired = ranked.repaired;
    row.sustainable_target = catalog.at(target).sustainable;
    for (std::size_t k : cutoffs) {
        row.hr[k] = hr_at_k(ranked, target, k);
        row.ndcg[k] = ndcg_at_k(ranked, target, k);
        row.green_share[k] = green_share_at_k(ranked, catalog, std::min(k, ranked.order.size()));
    }
    return row;
}

SessionResult zero_session(const std::string& session_id, const Catalog& catalog,
                           const std::string& target,
                           const std::vector<std::size_t>& cutoffs, bool failed) {
    SessionResult row;
    row.session_id = session_id;
    row.failed = failed;
    row.sustainable_target = catalog.at(target).sustainable;
    for (std::size_t k : cutoffs) {
        row.hr[k] = 0.0;
        row.ndcg[k] = 0.0;
        row.green_share[k] = 0.0;
    }
    return row;
}

MetricsReport aggregate(const std::vector<SessionResult>& rows,
                        const std::vector<std::size_t>& cutoffs) {
    if (rows.empty()) throw std::invalid_argument("aggregate: no session results");

    MetricsReport report;
    report.n_sessions = rows.size();
    const double n = static_cast<double>(rows.size());

    std::size_t retained = 0;
    std::size_t failures = 0;
    std::size_t green_targets = 0;
    for (const SessionResult& row : rows) {
        if (row.target_in_candidates) ++retained;
        if (row.failed) ++failures;
        if (row.sustainable_target) ++green_targets;
    }
    report.target_retention_rate = static_cast<double>(retained) / n;
    report.failure_rate = static_cast<double>(failures) / n;

    for (std::size_t k : cutoffs) {
        CutoffStats stats;
        double green = 0.0;
        for (const SessionResult& row : rows) {
            stats.hr += row.hr.at(k);
            stats.ndcg += row.ndcg.at(k);
            green += row.green_share.at(k);
        }
        stats.hr /= n;
        stats.ndcg /= n;
        report.cutoffs[k] = stats;
        report.green_share[k] = green / n;
    }

    if (green_targets > 0) {
        MetricsReport::GreenTarget green;
        green.n_sessions = green_targets;
        const double gn = static_cast<double>(green_targets);
        for (std::size_t k : cutoffs) {
            CutoffStats stats;
            for (const SessionResult& row : rows) {
                if (!row.sustainable_target) continue;
                stats.hr += row.hr.at(k);
                stats.ndcg += row.ndcg.at(k);
            }
            stats.hr /= gn;
            stats.ndcg /= gn;
            green.cutoffs[k] = stats;
        }
        report.green_target = std::move(green);
    }
    return report;
}

namespace {

json cutoff_map_to_json(const std::map<std::size_t, CutoffStats>& cutoffs) {
    json out = json::object();
    for (const auto& [k, stats] : cutoffs)
        out[std::to_string(k)] = {{"hr", stats.hr}, {"ndcg", stats.ndcg}};
    return out;
}

std::map<std::size_t, CutoffStats> cutoff_map_from_json(const json& obj) {
    std::map<std::size_t, CutoffStats> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        CutoffStats stats;
        stats.hr = it.value().at("hr").get<double>();
        stats.ndcg = it.value().at("ndcg").get<double>();
        out[std::stoul(it.key())] = stats;
    }
    return out;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
    json out;
    out["n_sessions"] = report.n_sessions;
    out["target_retention_rate"] = report.target_retention_rate;
    out["failure_rate"] = report.failure_rate;
    out["cutoffs"] = cutoff_map_to_json(report.cutoffs);
    json green = json::object();
    for (const auto& [k, share] : report.green_share) green[std::to_string(k)] = share;
    out["green_share"] = green;
    if (report.green_target) {
        out["green_target"] = {{"n_sessions", report.green_target->n_sessions},
                               {"cutoffs", cutoff_map_to_json(report.green_target->cutoffs)}};
    }
    return out.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw MissingArtifact("metrics.json is not valid JSON");
    MetricsReport report;
    report.n_sessions = parsed.at("n_sessions").get<std::size_t>();
    report.target_retention_rate = parsed.at("target_retention_rate").get<double>();
    report.failure_rate = parsed.value("failure_rate", 0.0);
    report.cutoffs = cutoff_map_from_json(parsed.at("cutoffs"));
    if (parsed.contains("green_share"))
        for (auto it = parsed["green_share"].begin(); it != parsed["green_share"].end(); ++it)
            report.green_share[std::stoul(it.key())] = it.value().get<double>();
    if (parsed.contains("green_target")) {
        MetricsReport::GreenTarget green;
        green.n_sessions = parsed["green_target"].at("n_sessions").get<std::size_t>();
        green.cutoffs = cutoff_map_from_json(parsed["green_target"].at("cutoffs"));
        report.green_target = std::move(green);
    }
    return report;
}

std::string session_result_to_json(const SessionResult& row) {
    json obj;
    obj["session_id"] = row.session_id;
    obj["target_rank"] = row.target_rank;
    obj["target_in_candidates"] = row.target_in_candidates;
    obj["failed"] = row.failed;
    obj["repaired"] = row.repaired;
    obj["sustainable_target"] = row.sustainable_target;
    json hr = json::object(), ndcg = json::object(), green = json::object();
    for (const auto& [k, v] : row.hr) hr[std::to_string(k)] = v;
    for (const auto& [k, v] : row.ndcg) ndcg[std::to_string(k)] = v;
    for (const auto& [k, v] : row.green_share) green[std::to_string(k)] = v;
    obj["hr"] = hr;
    obj["ndcg"] = ndcg;
    obj["green_share"] = green;
    return obj.dump();
}

}  // namespace ecorank
