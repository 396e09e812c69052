#pragma once

#include <string>
#include <vector>

#include "ecorank/config.hpp"
#include "ecorank/metrics.hpp"
#include "ecorank/optimizer.hpp"

namespace ecorank::cli {

struct FilterSummary {
    std::size_t train_sessions = 0;
    std::size_t test_sessions = 0;
    double train_retention = 0.0;
    double test_retention = 0.0;
};

// Samples the initial candidate pools, applies stage-1 filtering and
// writes candidates_train.jsonl / candidates_test.jsonl under the run
// directory (one initial and one filtered line per session, session order).
FilterSummary cmd_filter(const RunConfig& cfg);

// The closed optimization loop over the train split. Reads
// candidates_train.jsonl when present (recomputes it in memory otherwise)
// and persists trials.jsonl / prompts.jsonl / result.json; an interrupted
// run resumes from its trial log.
OptimizationResult cmd_optimize(const RunConfig& cfg);

// Fixed-prompt evaluation over the test split; writes metrics.json and
// per_session.jsonl. prompt_path empty -> best prompt from result.json,
// falling back to the configured seed prompt.
MetricsReport cmd_evaluate(const RunConfig& cfg, const std::string& prompt_path = "");

enum class ReportFormat { Table, Json, Tsv };

// Renders metrics.json (plus the trial summary when present) from a run
// directory to stdout.
void cmd_report(const std::string& run_dir, ReportFormat format = ReportFormat::Table);

// Full argv-level entry point: subcommands filter|optimize|evaluate|report.
// Returns the process exit code: 0 ok, 1 runtime failure, 2 config/usage.
int run(const std::vector<std::string>& args);

// Seed prompt text for a config (file or built-in default).
std::string load_seed_prompt(const RunConfig& cfg);

}  // namespace ecorank::cli
