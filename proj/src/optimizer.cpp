#include "ecorank/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/rng.hpp"

namespace ecorank {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(RewardMode mode) {
    return mode == RewardMode::NdcgFull ? "ndcg_full" : "hit_at_threshold";
}

RewardMode reward_mode_from_string(const std::string& s) {
    if (s == "ndcg_full") return RewardMode::NdcgFull;
    if (s == "hit_at_threshold") return RewardMode::HitAtThreshold;
    throw ConfigError("unknown reward mode: " + s);
}

double reward(const RankedList& ranked, const std::string& target, RewardMode mode,
              std::size_t threshold) {
    const std::size_t rank = ranked.rank_of(target);
    switch (mode) {
        case RewardMode::NdcgFull:
            if (rank == 0) return 0.0;
            return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        case RewardMode::HitAtThreshold:
            return (rank >= 1 && rank <= threshold) ? 1.0 : 0.0;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Trial record serialization
// ---------------------------------------------------------------------------

std::string trial_to_json(const TrialRecord& record) {
    json rows = json::array();
    for (const TrialRow& row : record.rows) {
        rows.push_back({{"session_id", row.session_id},
                        {"target_rank", row.target_rank},
                        {"reward", row.reward},
                        {"failed", row.failed},
                        {"repaired", row.repaired}});
    }
    json added = json::array();
    for (const Prompt& prompt : record.prompts_added) {
        json p;
        p["id"] = prompt.id;
        if (prompt.parent)
            p["parent"] = *prompt.parent;
        else
            p["parent"] = nullptr;
        p["origin"] = to_string(prompt.origin);
        p["text"] = prompt.text;
        added.push_back(std::move(p));
    }
    json obj;
    obj["trial"] = record.trial;
    obj["prompt_id"] = record.prompt_id;
    obj["mean_reward"] = record.mean_reward;
    obj["errors_flagged"] = record.errors_flagged;
    obj["rows"] = rows;
    obj["prompts_added"] = added;
    obj["prompts_evicted"] = record.prompts_evicted;
    return obj.dump();
}

TrialRecord trial_from_json(const std::string& line) {
    json obj = json::parse(line);
    TrialRecord record;
    record.trial = obj.at("trial").get<int>();
    record.prompt_id = obj.at("prompt_id").get<int>();
    record.mean_reward = obj.at("mean_reward").get<double>();
    record.errors_flagged = obj.at("errors_flagged").get<std::size_t>();
    for (const json& row : obj.at("rows")) {
        TrialRow r;
        r.session_id = row.at("session_id").get<std::string>();
        r.target_rank = row.at("target_rank").get<std::size_t>();
        r.reward = row.at("reward").get<double>();
        r.failed = row.at("failed").get<bool>();
        r.repaired = row.at("repaired").get<bool>();
        record.rows.push_back(std::move(r));
    }
    for (const json& p : obj.at("prompts_added")) {
        Prompt prompt;
        prompt.id = p.at("id").get<int>();
        if (!p.at("parent").is_null()) prompt.parent = p.at("parent").get<int>();
        prompt.origin = prompt_origin_from_string(p.at("origin").get<std::string>());
        prompt.text = p.at("text").get<std::string>();
        record.prompts_added.push_back(std::move(prompt));
    }
    for (const json& id : obj.at("prompts_evicted")) record.prompts_evicted.push_back(id.get<int>());
    return record;
}

// ---------------------------------------------------------------------------
// PromptPool
// ---------------------------------------------------------------------------

std::optional<Prompt> PromptPool::add(std::string text, PromptOrigin origin,
                                      std::optional<int> parent) {
    if (text.empty()) throw std::invalid_argument("prompt text must be non-empty");
    if (!texts_.insert(text).second) return std::nullopt;  // exact text already known
    Prompt prompt;
    prompt.id = next_id_++;
    prompt.text = std::move(text);
    prompt.parent = parent;
    prompt.origin = origin;
    prompts_.emplace(prompt.id, prompt);
    stats_.emplace(prompt.id, PromptStats{});
    return prompt;
}

void PromptPool::add_replayed(const Prompt& prompt) {
    if (prompts_.count(prompt.id))
        throw std::invalid_argument("replayed prompt id already present");
    texts_.insert(prompt.text);
    prompts_.emplace(prompt.id, prompt);
    stats_.emplace(prompt.id, PromptStats{});
    next_id_ = std::max(next_id_, prompt.id + 1);
}

void PromptPool::apply_reward(int id, double mean_reward) {
    PromptStats& stats = stats_.at(id);
    stats.reward_sum += mean_reward;
    stats.pull_count += 1;
}

std::vector<int> PromptPool::evict_to_cap(std::size_t pool_max, std::int64_t min_pulls,
                                          int incumbent) {
    std::vector<int> evicted;
    while (active_size() > pool_max) {
        int worst = 0;
        double worst_mean = std::numeric_limits<double>::infinity();
        for (const auto& [id, stats] : stats_) {
            if (evicted_.count(id) || id == incumbent) continue;
            if (stats.pull_count < min_pulls) continue;  // protects unpulled prompts too
            if (stats.mean() < worst_mean) {
                worst_mean = stats.mean();
                worst = id;
            }
        }
        if (worst == 0) break;  // nothing eligible; pool may exceed cap for now
        evicted_.insert(worst);
        evicted.push_back(worst);
    }
    return evicted;
}

void PromptPool::evict(int id) { evicted_.insert(id); }

std::map<int, PromptStats> PromptPool::active_stats() const {
    std::map<int, PromptStats> out;
    for (const auto& [id, stats] : stats_)
        if (!evicted_.count(id)) out.emplace(id, stats);
    return out;
}

const Prompt& PromptPool::prompt(int id) const { return prompts_.at(id); }
const PromptStats& PromptPool::stats(int id) const { return stats_.at(id); }

std::vector<Prompt> PromptPool::all_prompts() const {
    std::vector<Prompt> out;
    out.reserve(prompts_.size());
    for (const auto& [id, prompt] : prompts_) out.push_back(prompt);
    return out;
}

std::int64_t PromptPool::total_pulls() const {
    std::int64_t total = 0;
    for (const auto& [id, stats] : stats_) total += stats.pull_count;
    return total;
}

// ---------------------------------------------------------------------------
// Batch scheduling
// ---------------------------------------------------------------------------

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n_sessions,
                                       std::size_t batch_size, int trial) {
    if (n_sessions == 0) throw std::invalid_argument("batch_indices: no sessions");
    if (trial < 1) throw std::invalid_argument("batch_indices: trial must be >= 1");
    const std::size_t first_slot = static_cast<std::size_t>(trial - 1) * batch_size;

    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    std::size_t current_epoch = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> order;
    for (std::size_t slot = first_slot; slot < first_slot + batch_size; ++slot) {
        const std::size_t slot_epoch = slot / n_sessions;
        if (slot_epoch != current_epoch) {
            current_epoch = slot_epoch;
            order.resize(n_sessions);
            for (std::size_t i = 0; i < n_sessions; ++i) order[i] = i;
            Rng rng = Rng(seed).derive("epoch").derive(static_cast<std::uint64_t>(current_epoch));
            rng.shuffle(order);
        }
        batch.push_back(order[slot % n_sessions]);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

TrialRecord run_trial(Backend& backend, const Prompt& prompt,
                      const std::vector<const EvalInstance*>& batch, const Catalog& catalog,
                      const OptimizerConfig& cfg, const AgentOptions& opts, PromptPool& pool,
                      int trial_index) {
    if (batch.empty()) throw std::invalid_argument("run_trial: empty batch");

    TrialRecord record;
    record.trial = trial_index;
    record.prompt_id = prompt.id;
    record.rows.resize(batch.size());

    std::vector<std::optional<RankedList>> rankings(batch.size());

    const std::int64_t n = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        const EvalInstance& instance = *batch[idx];
        TrialRow row;
        row.session_id = instance.session.session_id;
        try {
            RankedList ranked =
                evaluate(backend, prompt, instance.session, instance.filtered, catalog, opts);
            row.target_rank = ranked.rank_of(instance.session.target);
            row.reward = reward(ranked, instance.session.target, cfg.reward_mode,
                                cfg.error_threshold);
            row.repaired = ranked.repaired;
            rankings[idx] = std::move(ranked);
        } catch (const std::exception&) {
            row.failed = true;  // a lost session scores 0; the trial goes on
        }
        record.rows[idx] = std::move(row);
    }

    double sum = 0.0;
    for (const TrialRow& row : record.rows) sum += row.reward;
    record.mean_reward = sum / static_cast<double>(record.rows.size());
    pool.apply_reward(prompt.id, record.mean_reward);

    // Error-driven expansion: refine the prompt that just failed, driven by
    // its flagged sessions in batch order, capped per trial.
    std::size_t chains_run = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!rankings[i]) continue;
        auto error = detect_error(*rankings[i], batch[i]->session.target, cfg.error_threshold,
                                  prompt.id);
        if (!error) continue;
        ++record.errors_flagged;
        if (chains_run >= cfg.errors_per_trial) continue;
        ++chains_run;

        try {
            const ReasonList reasons =
                infer_reason(backend, prompt, *error, batch[i]->session, batch[i]->filtered,
                             catalog, &*rankings[i], opts);
            const Prompt refined_draft = refine_prompt(backend, prompt, reasons, opts);
            std::optional<Prompt> refined =
                pool.add(refined_draft.text, refined_draft.origin, refined_draft.parent);
            if (refined) {
                record.prompts_added.push_back(*refined);
                // Paraphrase the fresh refinement; a duplicate text means
                // its variants were already explored.
                std::vector<Prompt> variants = augment(backend, *refined, cfg.n_variants, opts);
                for (const Prompt& draft : variants) {
                    std::optional<Prompt> variant =
                        pool.add(draft.text, draft.origin, draft.parent);
                    if (variant) record.prompts_added.push_back(*variant);
                }
            }
        } catch (const Error&) {
            // Chain failures leave the pool unchanged beyond what already
            // succeeded; the loop must never abort on one bad completion.
        }
    }

    record.prompts_evicted =
        pool.evict_to_cap(cfg.pool_max, cfg.min_pulls_for_best, prompt.id);
    return record;
}

int best_prompt_id(const PromptPool& pool, std::int64_t min_pulls) {
    int best = 0;
    double best_mean = -1.0;
    for (const Prompt& prompt : pool.all_prompts()) {
        const PromptStats& stats = pool.stats(prompt.id);
        if (stats.pull_count < min_pulls) continue;
        if (stats.mean() > best_mean) {
            best_mean = stats.mean();
            best = prompt.id;
        }
    }
    if (best != 0) return best;
    for (const Prompt& prompt : pool.all_prompts()) {  // fallback: best mean overall
        const PromptStats& stats = pool.stats(prompt.id);
        if (stats.mean() > best_mean) {
            best_mean = stats.mean();
            best = prompt.id;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

namespace {

void write_prompts_file(const fs::path& path, const PromptPool& pool) {
    std::ofstream out(path, std::ios::trunc);
    for (const Prompt& prompt : pool.all_prompts()) {
        json obj;
        obj["id"] = prompt.id;
        if (prompt.parent)
            obj["parent"] = *prompt.parent;
        else
            obj["parent"] = nullptr;
        obj["origin"] = to_string(prompt.origin);
        obj["text"] = prompt.text;
        out << obj.dump() << '\n';
    }
}

void write_result_file(const fs::path& path, const PromptPool& pool, int best_id,
                       std::size_t trials) {
    const Prompt& best = pool.prompt(best_id);
    json obj;
    obj["best_prompt"]["id"] = best.id;
    obj["best_prompt"]["text"] = best.text;
    obj["best_prompt"]["origin"] = to_string(best.origin);
    if (best.parent)
        obj["best_prompt"]["parent"] = *best.parent;
    else
        obj["best_prompt"]["parent"] = nullptr;
    obj["trials"] = trials;
    json pool_stats = json::array();
    for (const Prompt& prompt : pool.all_prompts()) {
        const PromptStats& stats = pool.stats(prompt.id);
        pool_stats.push_back({{"id", prompt.id},
                              {"reward_sum", stats.reward_sum},
                              {"pull_count", stats.pull_count},
                              {"mean", stats.mean()},
                              {"evicted", pool.is_evicted(prompt.id)}});
    }
    obj["pool"] = pool_stats;
    std::ofstream out(path, std::ios::trunc);
    out << obj.dump(2) << '\n';
}

// Valid records from an interrupted log; anything from the first bad line
// on is dropped (a torn final write looks exactly like that).
std::vector<TrialRecord> read_trial_log(const fs::path& path, bool& truncated) {
    std::vector<TrialRecord> records;
    truncated = false;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(trial_from_json(line));
        } catch (const std::exception&) {
            truncated = true;
            break;
        }
    }
    return records;
}

}  // namespace

OptimizationResult optimize(const OptimizerConfig& cfg,
                            const std::vector<EvalInstance>& instances, const Catalog& catalog,
                            Backend& backend, const std::vector<std::string>& seed_prompt_texts,
                            const std::string& run_dir, const AgentOptions& opts) {
    if (instances.empty()) throw std::invalid_argument("optimize: no training instances");
    if (seed_prompt_texts.empty()) throw std::invalid_argument("optimize: no seed prompt");
    if (cfg.pool_max < 2) throw ConfigError("pool_max must be >= 2");
    if (cfg.max_trials < 1) throw ConfigError("max_trials must be >= 1");
    for (const std::string& text : seed_prompt_texts)
        if (!has_placeholders(text))
            throw ConfigError("seed prompt is missing {session}/{candidates} placeholders");

    PromptPool pool;
    for (const std::string& text : seed_prompt_texts)
        pool.add(text, PromptOrigin::Seed, std::nullopt);

    std::vector<TrialRecord> trials;

    const bool persist = !run_dir.empty();
    fs::path trials_path, prompts_path, result_path;
    if (persist) {
        fs::create_directories(run_dir);
        trials_path = fs::path(run_dir) / "trials.jsonl";
        prompts_path = fs::path(run_dir) / "prompts.jsonl";
        result_path = fs::path(run_dir) / "result.json";

        if (fs::exists(trials_path)) {
            bool truncated = false;
            trials = read_trial_log(trials_path, truncated);
            for (const TrialRecord& record : trials) {
                for (const Prompt& prompt : record.prompts_added) pool.add_replayed(prompt);
                pool.apply_reward(record.prompt_id, record.mean_reward);
                for (int id : record.prompts_evicted) pool.evict(id);
            }
            if (truncated) {  // drop the torn tail before appending
                std::ofstream rewrite(trials_path, std::ios::trunc);
                for (const TrialRecord& record : trials)
                    rewrite << trial_to_json(record) << '\n';
            }
        }
    }

    int consecutive_dead_trials = 0;
    for (const TrialRecord& record : trials) {
        const bool all_failed = std::all_of(record.rows.begin(), record.rows.end(),
                                            [](const TrialRow& row) { return row.failed; });
        consecutive_dead_trials = all_failed ? consecutive_dead_trials + 1 : 0;
    }

    for (int t = static_cast<int>(trials.size()) + 1; t <= cfg.max_trials; ++t) {
        const int selected = select_prompt(pool.active_stats(), t, cfg.explore_c);

        std::vector<std::size_t> indices =
            batch_indices(cfg.seed, instances.size(),
                          std::min(cfg.batch_size, instances.size()), t);
        std::vector<const EvalInstance*> batch;
        batch.reserve(indices.size());
        for (std::size_t idx : indices) batch.push_back(&instances[idx]);

        TrialRecord record =
            run_trial(backend, pool.prompt(selected), batch, catalog, cfg, opts, pool, t);
        trials.push_back(record);

        if (persist) {
            {
                std::ofstream out(trials_path, std::ios::app);
                out << trial_to_json(record) << '\n';
                out.flush();
            }
            write_prompts_file(prompts_path, pool);
        }

        const bool all_failed = std::all_of(record.rows.begin(), record.rows.end(),
                                            [](const TrialRow& row) { return row.failed; });
        consecutive_dead_trials = all_failed ? consecutive_dead_trials + 1 : 0;
        if (consecutive_dead_trials >= 3) throw Aborted(t);
    }

    const int best_id = best_prompt_id(pool, cfg.min_pulls_for_best);
    if (persist) write_result_file(result_path, pool, best_id, trials.size());

    OptimizationResult result;
    result.best_prompt = pool.prompt(best_id);
    result.prompts = pool.all_prompts();
    for (const Prompt& prompt : result.prompts) {
        result.stats.emplace(prompt.id, pool.stats(prompt.id));
        if (pool.is_evicted(prompt.id)) result.evicted.insert(prompt.id);
    }
    result.trials = std::move(trials);
    return result;
}

}  // namespace ecorank
