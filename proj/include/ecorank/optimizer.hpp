#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "ecorank/agents.hpp"
#include "ecorank/domain.hpp"
#include "ecorank/llm_backend.hpp"

namespace ecorank {

enum class RewardMode { NdcgFull, HitAtThreshold };

const char* to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& s);

struct OptimizerConfig {
    int max_trials = 50;
    std::size_t batch_size = 16;        // sessions evaluated per trial
    std::size_t error_threshold = 10;   // rank > threshold flags an error
    std::size_t errors_per_trial = 2;   // refinement chains per trial
    std::size_t n_variants = 3;
    std::size_t pool_max = 12;
    std::int64_t min_pulls_for_best = 3;
    RewardMode reward_mode = RewardMode::NdcgFull;
    double explore_c = 1.4142135623730950488;  // sqrt(2)
    std::uint64_t seed = 42;
};

// Per-pull prompt quality in [0,1]. NdcgFull pays 1/log2(rank+1) for the
// target's rank (0 when absent); HitAtThreshold pays 1 iff rank <= threshold.
double reward(const RankedList& ranked, const std::string& target, RewardMode mode,
              std::size_t threshold);

// A session paired with its stage-1 filtered candidates.
struct EvalInstance {
    Session session;
    CandidateSet filtered;
};

struct TrialRow {
    std::string session_id;
    std::size_t target_rank = 0;  // 1-based; 0 = absent or failed
    double reward = 0.0;
    bool failed = false;
    bool repaired = false;
};

struct TrialRecord {
    int trial = 0;  // 1-based, strictly increasing
    int prompt_id = 0;
    std::vector<TrialRow> rows;
    double mean_reward = 0.0;
    std::size_t errors_flagged = 0;
    std::vector<Prompt> prompts_added;  // full objects so logs replay standalone
    std::vector<int> prompts_evicted;
};

std::string trial_to_json(const TrialRecord& record);
TrialRecord trial_from_json(const std::string& line);

// Owns prompt identity and bandit accounting. Ids are assigned
// monotonically from 1; stats of evicted prompts stay archived so
// conservation (sum of pulls == completed trials) always holds.
class PromptPool {
public:
    // Registers a new prompt; nullopt when the exact text already exists.
    std::optional<Prompt> add(std::string text, PromptOrigin origin, std::optional<int> parent);

    // Replay path: re-registers a prompt under its recorded id.
    void add_replayed(const Prompt& prompt);

    void apply_reward(int id, double mean_reward);

    // Drops lowest-mean prompts until the active pool fits pool_max. Only
    // prompts with at least min_pulls pulls are eligible; the incumbent and
    // unpulled prompts never are. Returns the evicted ids.
    std::vector<int> evict_to_cap(std::size_t pool_max, std::int64_t min_pulls, int incumbent);
    void evict(int id);

    std::map<int, PromptStats> active_stats() const;
    const Prompt& prompt(int id) const;
    const PromptStats& stats(int id) const;
    std::vector<Prompt> all_prompts() const;  // id order, evicted included
    bool is_evicted(int id) const { return evicted_.count(id) != 0; }
    std::size_t active_size() const { return prompts_.size() - evicted_.size(); }
    std::size_t total_size() const { return prompts_.size(); }
    std::int64_t total_pulls() const;

private:
    std::map<int, Prompt> prompts_;
    std::map<int, PromptStats> stats_;
    std::set<int> evicted_;
    std::unordered_set<std::string> texts_;
    int next_id_ = 1;
};

// Session indices evaluated by trial t (1-based): a without-replacement
// walk through epoch-shuffled session order, reshuffled every epoch. Pure
// in (seed, t), which is what makes resume deterministic.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n_sessions,
                                       std::size_t batch_size, int trial);

// One bandit pull: evaluates the prompt over the batch, pays the mean
// reward, then runs the error-driven refinement chain for up to
// errors_per_trial flagged sessions and inserts whatever it produces.
TrialRecord run_trial(Backend& backend, const Prompt& prompt,
                      const std::vector<const EvalInstance*>& batch, const Catalog& catalog,
                      const OptimizerConfig& cfg, const AgentOptions& opts, PromptPool& pool,
                      int trial_index);

struct OptimizationResult {
    Prompt best_prompt;
    std::vector<Prompt> prompts;       // every prompt ever created
    std::map<int, PromptStats> stats;  // archived stats included
    std::set<int> evicted;
    std::vector<TrialRecord> trials;   // replayed + newly executed
};

// Runs the full loop: UCB selection, batch evaluation, refinement,
// eviction, best-prompt extraction. seed_prompt_texts[0] is the seed;
// extras join the pool as additional Seed prompts.
//
// With a run_dir, every trial is appended to <run_dir>/trials.jsonl before
// state moves on (crash-safe), prompts.jsonl is kept in sync and
// result.json is written at the end. An existing trials.jsonl is replayed
// first, so an interrupted run continues to max_trials and ends byte-equal
// to an uninterrupted one.
OptimizationResult optimize(const OptimizerConfig& cfg,
                            const std::vector<EvalInstance>& instances, const Catalog& catalog,
                            Backend& backend, const std::vector<std::string>& seed_prompt_texts,
                            const std::string& run_dir = "", const AgentOptions& opts = {});

// Best prompt id under the min-pulls rule (fallback: best mean overall).
int best_prompt_id(const PromptPool& pool, std::int64_t min_pulls);

}  // namespace ecorank
