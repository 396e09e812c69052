#include "ecorank/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecorank/agents.hpp"
#include "ecorank/errors.hpp"
#include "ecorank/ingest.hpp"
#include "ecorank/reranker.hpp"

namespace ecorank::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is not configured");
    if (!fs::exists(path)) throw ConfigError(what + " file does not exist: " + path);
}

std::unique_ptr<Scorer> make_scorer(const RunConfig& cfg) {
    if (cfg.scorer == ScorerKind::Remote)
        return make_remote_scorer({cfg.remote_endpoint, cfg.backend.timeout_ms, 256});
    return make_lexical_scorer();
}

std::unique_ptr<Backend> make_run_backend(const RunConfig& cfg, const std::string& run_dir) {
    BackendConfig backend_cfg = cfg.backend;
    if (cfg.trace) backend_cfg.trace_path = (fs::path(run_dir) / "llm_trace.jsonl").string();
    return make_backend(backend_cfg);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out << content;
}

struct SplitFilterOutput {
    std::vector<FilterResult> results;
    double retention = 0.0;
};

SplitFilterOutput filter_split(const RunConfig& cfg, Scorer& scorer,
                               const std::vector<Session>& sessions, const Catalog& catalog,
                               const fs::path& out_path) {
    std::vector<CandidateSet> initial;
    initial.reserve(sessions.size());
    for (const Session& session : sessions)
        initial.push_back(sample_candidates(session, catalog, cfg.n_initial, cfg.seed));

    SplitFilterOutput out;
    out.results = filter_sessions(scorer, sessions, initial, cfg.k_filter, catalog);

    std::string buffer;
    std::size_t retained = 0;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        append_candidate_set(buffer, initial[i]);
        append_candidate_set(buffer, out.results[i].filtered);
        if (out.results[i].diagnostics.target_retained) ++retained;
    }
    write_file(out_path, buffer);
    out.retention =
        sessions.empty() ? 0.0 : static_cast<double>(retained) / sessions.size();
    return out;
}

// Filtered candidate sets for a split: from the candidates file written by
// `filter` when present, recomputed in memory otherwise (same seed, same
// code path, so the result is identical).
std::vector<EvalInstance> gather_instances(const RunConfig& cfg, Scorer& scorer,
                                           const std::vector<Session>& sessions,
                                           const Catalog& catalog,
                                           const fs::path& candidates_path) {
    std::vector<EvalInstance> instances;
    instances.reserve(sessions.size());

    if (fs::exists(candidates_path)) {
        std::unordered_map<std::string, CandidateSet> filtered;
        for (CandidateSet& set : load_candidate_sets(candidates_path.string())) {
            if (set.kind == CandidateKind::Filtered) filtered[set.session_id] = std::move(set);
        }
        for (const Session& session : sessions) {
            auto it = filtered.find(session.session_id);
            if (it == filtered.end())
                throw ConfigError("no filtered candidates for session " + session.session_id +
                                  " in " + candidates_path.string() + "; rerun filter");
            instances.push_back({session, it->second});
        }
        return instances;
    }

    for (const Session& session : sessions) {
        CandidateSet initial = sample_candidates(session, catalog, cfg.n_initial, cfg.seed);
        FilterResult result =
            filter_candidates(scorer, session, initial, cfg.k_filter, catalog);
        instances.push_back({session, std::move(result.filtered)});
    }
    return instances;
}

std::string read_text_file(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + what + ": " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

std::string load_seed_prompt(const RunConfig& cfg) {
    std::string text = cfg.seed_prompt_path.empty()
                           ? std::string(DEFAULT_SEED_PROMPT)
                           : read_text_file(cfg.seed_prompt_path, "seed prompt");
    if (!has_placeholders(text))
        throw ConfigError("seed prompt must contain {session} and {candidates}");
    return text;
}

FilterSummary cmd_filter(const RunConfig& cfg) {
    require_file(cfg.catalog_path, "catalog");
    require_file(cfg.sessions_train_path, "train sessions");
    require_file(cfg.sessions_test_path, "test sessions");

    const Catalog catalog = load_catalog(cfg.catalog_path);
    const std::vector<Session> train = load_sessions(cfg.sessions_train_path, catalog);
    const std::vector<Session> test = load_sessions(cfg.sessions_test_path, catalog);

    const std::string run_dir = cfg.resolved_run_dir();
    fs::create_directories(run_dir);
    std::unique_ptr<Scorer> scorer = make_scorer(cfg);

    FilterSummary summary;
    summary.train_sessions = train.size();
    summary.test_sessions = test.size();
    summary.train_retention =
        filter_split(cfg, *scorer, train, catalog, fs::path(run_dir) / "candidates_train.jsonl")
            .retention;
    summary.test_retention =
        filter_split(cfg, *scorer, test, catalog, fs::path(run_dir) / "candidates_test.jsonl")
            .retention;

    std::printf("filtered train: %zu sessions, target retention %.4f\n",
                summary.train_sessions, summary.train_retention);
    std::printf("filtered test:  %zu sessions, target retention %.4f\n", summary.test_sessions,
                summary.test_retention);
    return summary;
}

OptimizationResult cmd_optimize(const RunConfig& cfg) {
    require_file(cfg.catalog_path, "catalog");
    require_file(cfg.sessions_train_path, "train sessions");

    const Catalog catalog = load_catalog(cfg.catalog_path);
    const std::vector<Session> train = load_sessions(cfg.sessions_train_path, catalog);
    if (train.empty()) throw ConfigError("train split is empty");

    const std::string run_dir = cfg.resolved_run_dir();
    fs::create_directories(run_dir);
    std::unique_ptr<Scorer> scorer = make_scorer(cfg);
    std::vector<EvalInstance> instances = gather_instances(
        cfg, *scorer, train, catalog, fs::path(run_dir) / "candidates_train.jsonl");

    std::unique_ptr<Backend> backend = make_run_backend(cfg, run_dir);
    OptimizationResult result = optimize(cfg.optimizer, instances, catalog, *backend,
                                         {load_seed_prompt(cfg)}, run_dir);

    const PromptStats& best = result.stats.at(result.best_prompt.id);
    std::printf("optimize: %zu trials, %zu prompts, best prompt %d (%s) mean reward %.4f\n",
                result.trials.size(), result.prompts.size(), result.best_prompt.id,
                to_string(result.best_prompt.origin), best.mean());
    return result;
}

MetricsReport cmd_evaluate(const RunConfig& cfg, const std::string& prompt_path) {
    require_file(cfg.catalog_path, "catalog");
    require_file(cfg.sessions_test_path, "test sessions");

    const Catalog catalog = load_catalog(cfg.catalog_path);
    const std::vector<Session> test = load_sessions(cfg.sessions_test_path, catalog);
    if (test.empty()) throw ConfigError("test split is empty; nothing to evaluate");

    const std::string run_dir = cfg.resolved_run_dir();
    fs::create_directories(run_dir);
    std::unique_ptr<Scorer> scorer = make_scorer(cfg);
    const std::vector<EvalInstance> instances = gather_instances(
        cfg, *scorer, test, catalog, fs::path(run_dir) / "candidates_test.jsonl");

    Prompt prompt;  // id 0: a fixed prompt outside any pool
    if (!prompt_path.empty()) {
        prompt.text = read_text_file(prompt_path, "prompt file");
    } else if (fs::exists(fs::path(run_dir) / "result.json")) {
        json result = json::parse(read_text_file((fs::path(run_dir) / "result.json").string(),
                                                 "result.json"));
        prompt.text = result.at("best_prompt").at("text").get<std::string>();
    } else {
        prompt.text = load_seed_prompt(cfg);
    }
    if (!has_placeholders(prompt.text))
        throw ConfigError("evaluation prompt must contain {session} and {candidates}");

    std::unique_ptr<Backend> backend = make_run_backend(cfg, run_dir);

    std::vector<SessionResult> rows(instances.size());
    const std::int64_t n = static_cast<std::int64_t>(instances.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        const EvalInstance& instance = instances[idx];
        const bool target_in_candidates =
            std::find(instance.filtered.candidates.begin(), instance.filtered.candidates.end(),
                      instance.session.target) != instance.filtered.candidates.end();
        try {
            RankedList ranked =
                evaluate(*backend, prompt, instance.session, instance.filtered, catalog);
            assert_permutation(ranked, instance.filtered.candidates);
            rows[idx] = score_session(ranked, instance.session.target, catalog, cfg.cutoffs,
                                      target_in_candidates);
        } catch (const std::exception&) {
            rows[idx] = zero_session(instance.session.session_id, catalog,
                                     instance.session.target, cfg.cutoffs, true);
            rows[idx].target_in_candidates = target_in_candidates;
        }
    }

    const MetricsReport report = aggregate(rows, cfg.cutoffs);
    write_file(fs::path(run_dir) / "metrics.json", metrics_to_json(report));
    std::string per_session;
    for (const SessionResult& row : rows) {
        per_session += session_result_to_json(row);
        per_session += '\n';
    }
    write_file(fs::path(run_dir) / "per_session.jsonl", per_session);

    std::printf("evaluated %zu sessions (retention %.4f, failures %.4f)\n", report.n_sessions,
                report.target_retention_rate, report.failure_rate);
    for (const auto& [k, stats] : report.cutoffs)
        std::printf("HR@%zu %.4f  NDCG@%zu %.4f\n", k, stats.hr, k, stats.ndcg);
    return report;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace {

struct PoolRow {
    int id = 0;
    std::string origin;
    std::int64_t pulls = 0;
    double mean = 0.0;
    bool evicted = false;
};

struct RunSummary {
    MetricsReport metrics;
    std::vector<PoolRow> pool;
    std::optional<int> best_prompt_id;
    std::optional<std::size_t> trials;
};

RunSummary load_run_summary(const std::string& run_dir) {
    const fs::path metrics_path = fs::path(run_dir) / "metrics.json";
    if (!fs::exists(metrics_path)) throw MissingArtifact(metrics_path.string());

    RunSummary summary;
    summary.metrics = metrics_from_json(read_text_file(metrics_path.string(), "metrics.json"));

    const fs::path result_path = fs::path(run_dir) / "result.json";
    if (fs::exists(result_path)) {
        json result = json::parse(read_text_file(result_path.string(), "result.json"));
        summary.best_prompt_id = result.at("best_prompt").at("id").get<int>();
        summary.trials = result.at("trials").get<std::size_t>();
        std::unordered_map<int, std::string> origins;
        const fs::path prompts_path = fs::path(run_dir) / "prompts.jsonl";
        if (fs::exists(prompts_path)) {
            std::ifstream in(prompts_path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                json obj = json::parse(line);
                origins[obj.at("id").get<int>()] = obj.at("origin").get<std::string>();
            }
        }
        for (const json& entry : result.at("pool")) {
            PoolRow row;
            row.id = entry.at("id").get<int>();
            row.pulls = entry.at("pull_count").get<std::int64_t>();
            row.mean = entry.at("mean").get<double>();
            row.evicted = entry.at("evicted").get<bool>();
            auto it = origins.find(row.id);
            row.origin = it == origins.end() ? "?" : it->second;
            summary.pool.push_back(row);
        }
    }
    return summary;
}

void print_table(const std::string& run_dir, const RunSummary& summary) {
    const MetricsReport& m = summary.metrics;
    std::printf("run: %s\n\n", run_dir.c_str());
    std::printf("%-22s %zu\n", "sessions", m.n_sessions);
    std::printf("%-22s %.4f\n", "target retention", m.target_retention_rate);
    std::printf("%-22s %.4f\n\n", "failure rate", m.failure_rate);

    for (const auto& [k, stats] : m.cutoffs)
        std::printf("%-22s %.4f\n", ("HR@" + std::to_string(k)).c_str(), stats.hr);
    for (const auto& [k, stats] : m.cutoffs)
        std::printf("%-22s %.4f\n", ("NDCG@" + std::to_string(k)).c_str(), stats.ndcg);
    for (const auto& [k, share] : m.green_share)
        std::printf("%-22s %.4f\n", ("green_share@" + std::to_string(k)).c_str(), share);

    if (m.green_target) {
        std::printf("\ngreen-target sessions  %zu\n", m.green_target->n_sessions);
        for (const auto& [k, stats] : m.green_target->cutoffs)
            std::printf("%-22s %.4f\n", ("green_HR@" + std::to_string(k)).c_str(), stats.hr);
        for (const auto& [k, stats] : m.green_target->cutoffs)
            std::printf("%-22s %.4f\n", ("green_NDCG@" + std::to_string(k)).c_str(),
                        stats.ndcg);
    }

    if (!summary.pool.empty()) {
        std::printf("\ntrials: %zu, best prompt: %d\n", *summary.trials,
                    *summary.best_prompt_id);
        std::printf("%-5s %-9s %-7s %-8s %s\n", "id", "origin", "pulls", "mean", "evicted");
        for (const PoolRow& row : summary.pool)
            std::printf("%-5d %-9s %-7lld %-8.4f %s\n", row.id, row.origin.c_str(),
                        static_cast<long long>(row.pulls), row.mean,
                        row.evicted ? "yes" : "no");
    }
}

void print_tsv(const RunSummary& summary) {
    const MetricsReport& m = summary.metrics;
    std::printf("metric\tvalue\n");
    std::printf("sessions\t%zu\n", m.n_sessions);
    std::printf("target_retention\t%.6f\n", m.target_retention_rate);
    std::printf("failure_rate\t%.6f\n", m.failure_rate);
    for (const auto& [k, stats] : m.cutoffs) std::printf("hr@%zu\t%.6f\n", k, stats.hr);
    for (const auto& [k, stats] : m.cutoffs) std::printf("ndcg@%zu\t%.6f\n", k, stats.ndcg);
    for (const auto& [k, share] : m.green_share)
        std::printf("green_share@%zu\t%.6f\n", k, share);
    if (m.green_target) {
        std::printf("green_target_sessions\t%zu\n", m.green_target->n_sessions);
        for (const auto& [k, stats] : m.green_target->cutoffs)
            std::printf("green_hr@%zu\t%.6f\n", k, stats.hr);
        for (const auto& [k, stats] : m.green_target->cutoffs)
            std::printf("green_ndcg@%zu\t%.6f\n", k, stats.ndcg);
    }
}

void print_json(const std::string& run_dir, const RunSummary& summary) {
    json out = json::parse(metrics_to_json(summary.metrics));
    if (summary.best_prompt_id) {
        out["trials"] = *summary.trials;
        out["best_prompt_id"] = *summary.best_prompt_id;
        json pool = json::array();
        for (const PoolRow& row : summary.pool)
            pool.push_back({{"id", row.id},
                            {"origin", row.origin},
                            {"pulls", row.pulls},
                            {"mean", row.mean},
                            {"evicted", row.evicted}});
        out["pool"] = pool;
    }
    out["run_dir"] = run_dir;
    std::printf("%s\n", out.dump(2).c_str());
}

}  // namespace

void cmd_report(const std::string& run_dir, ReportFormat format) {
    const RunSummary summary = load_run_summary(run_dir);
    switch (format) {
        case ReportFormat::Table: print_table(run_dir, summary); break;
        case ReportFormat::Tsv: print_tsv(summary); break;
        case ReportFormat::Json: print_json(run_dir, summary); break;
    }
}

// ---------------------------------------------------------------------------
// argv entry point
// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args) {
    CLI::App app{"session-based recommendation pipeline with closed-loop prompt optimization"};
    app.require_subcommand(1);

    std::string config_path, mock_script, backend_kind, prompt_path, run_dir_arg;
    std::string format_name = "table";
    std::optional<std::uint64_t> seed_override;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        CLI::Option* opt = sub->add_option("--config", config_path, "run configuration file");
        if (config_required) opt->required();
        sub->add_option("--seed", seed_override, "override the global seed");
        sub->add_option("--backend", backend_kind, "override backend kind (mock|http)");
        sub->add_option("--mock-script", mock_script, "override the mock script path");
    };

    CLI::App* filter_cmd =
        app.add_subcommand("filter", "sample and filter candidate sets for both splits");
    add_common(filter_cmd, true);
    CLI::App* optimize_cmd =
        app.add_subcommand("optimize", "run the prompt-optimization loop on the train split");
    add_common(optimize_cmd, true);
    CLI::App* evaluate_cmd =
        app.add_subcommand("evaluate", "score a fixed prompt on the test split");
    add_common(evaluate_cmd, true);
    evaluate_cmd->add_option("--prompt", prompt_path, "prompt text file (default: run result)");
    CLI::App* report_cmd = app.add_subcommand("report", "render a run directory");
    report_cmd->add_option("run_dir", run_dir_arg, "run directory");
    report_cmd->add_option("--config", config_path, "run configuration file");
    report_cmd->add_option("--format", format_name, "table|json|tsv")
        ->check(CLI::IsMember({"table", "json", "tsv"}));

    std::vector<std::string> argv_storage;
    argv_storage.push_back("ecorank");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (std::string& arg : argv_storage) argv.push_back(arg.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::load(config_path);
        if (seed_override) {
            cfg.seed = *seed_override;
            cfg.optimizer.seed = *seed_override;
        }
        if (!backend_kind.empty()) cfg.backend.kind = backend_kind_from_string(backend_kind);
        if (!mock_script.empty()) cfg.backend.mock_script_path = mock_script;

        if (filter_cmd->parsed()) {
            cmd_filter(cfg);
        } else if (optimize_cmd->parsed()) {
            cmd_optimize(cfg);
        } else if (evaluate_cmd->parsed()) {
            cmd_evaluate(cfg, prompt_path);
        } else if (report_cmd->parsed()) {
            std::string run_dir = run_dir_arg;
            if (run_dir.empty() && !config_path.empty()) run_dir = cfg.resolved_run_dir();
            if (run_dir.empty())
                throw ConfigError("report needs a run directory or --config");
            ReportFormat format = ReportFormat::Table;
            if (format_name == "json") format = ReportFormat::Json;
            if (format_name == "tsv") format = ReportFormat::Tsv;
            cmd_report(run_dir, format);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace ecorank::cli
