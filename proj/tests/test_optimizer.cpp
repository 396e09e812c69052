#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "ecorank/errors.hpp"
#include "ecorank/optimizer.hpp"
#include "support/fixtures.hpp"

using namespace ecorank;
using namespace ecorank::test;

namespace {

RankedList ranking_of(std::vector<std::string> order) {
    RankedList ranked;
    ranked.order = std::move(order);
    return ranked;
}

// Sessions paired with 20-item filtered sets that contain the target.
std::vector<EvalInstance> make_instances(const Catalog& catalog, std::size_t n_sessions) {
    Rng rng(7);
    std::vector<EvalInstance> out;
    for (std::size_t s = 0; s < n_sessions; ++s) {
        std::vector<std::size_t> indices(catalog.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
        rng.shuffle(indices);

        EvalInstance instance;
        instance.session.session_id = "s" + std::to_string(s);
        instance.session.interactions = {catalog.items()[indices[21]].id};
        instance.session.target = catalog.items()[indices[0]].id;
        instance.filtered.session_id = instance.session.session_id;
        instance.filtered.kind = CandidateKind::Filtered;
        for (std::size_t i = 0; i < 20; ++i)
            instance.filtered.candidates.push_back(catalog.items()[indices[i]].id);
        out.push_back(std::move(instance));
    }
    return out;
}

MockBackend quality_backend() {
    MockScript script;
    script.quality_ranker = true;
    return MockBackend(script);
}

OptimizerConfig small_config(int max_trials, std::uint64_t seed = 11) {
    OptimizerConfig cfg;
    cfg.max_trials = max_trials;
    cfg.batch_size = 8;
    cfg.errors_per_trial = 0;  // no refinement unless a test scripts it
    cfg.seed = seed;
    return cfg;
}

constexpr const char* kHighPrompt = "{{q=0.9}} rank: {session} {candidates}";
constexpr const char* kLowPrompt = "{{q=0.1}} rank: {session} {candidates}";

}  // namespace

TEST_CASE("reward pays by target rank") {
    const RankedList ranked = ranking_of({"a", "b", "c", "d"});
    CHECK(reward(ranked, "a", RewardMode::NdcgFull, 10) == doctest::Approx(1.0));
    CHECK(reward(ranked, "c", RewardMode::NdcgFull, 10) ==
          doctest::Approx(0.5).epsilon(1e-12));  // 1/log2(4)
    CHECK(reward(ranked, "zz", RewardMode::NdcgFull, 10) == 0.0);

    RankedList wide = ranking_of({});
    for (int i = 1; i <= 20; ++i) wide.order.push_back("x" + std::to_string(i));
    CHECK(reward(wide, "x10", RewardMode::HitAtThreshold, 10) == 1.0);
    CHECK(reward(wide, "x11", RewardMode::HitAtThreshold, 10) == 0.0);
    CHECK(reward(wide, "zz", RewardMode::HitAtThreshold, 10) == 0.0);
}

TEST_CASE("prompt pool assigns ids, dedupes text and archives evictions") {
    PromptPool pool;
    const auto seed = pool.add("seed {session} {candidates}", PromptOrigin::Seed, std::nullopt);
    REQUIRE(seed.has_value());
    CHECK(seed->id == 1);

    CHECK_FALSE(
        pool.add("seed {session} {candidates}", PromptOrigin::Refined, 1).has_value());

    const auto second = pool.add("two {session} {candidates}", PromptOrigin::Refined, 1);
    REQUIRE(second.has_value());
    CHECK(second->id == 2);
    CHECK(second->parent == 1);

    pool.apply_reward(1, 0.5);
    CHECK(pool.stats(1).pull_count == 1);
    CHECK(pool.stats(1).reward_sum == doctest::Approx(0.5));
    CHECK(pool.total_pulls() == 1);

    pool.evict(2);
    CHECK(pool.active_size() == 1);
    CHECK(pool.total_size() == 2);
    CHECK(pool.active_stats().count(2) == 0);
}

TEST_CASE("eviction drops the worst pulled prompt, never incumbent or unpulled") {
    PromptPool pool;
    for (int i = 1; i <= 5; ++i)
        pool.add("p" + std::to_string(i) + " {session} {candidates}", PromptOrigin::Seed,
                 std::nullopt);
    // prompts 1..3 pulled with distinct means; 4 and 5 unpulled
    for (int pull = 0; pull < 3; ++pull) {
        pool.apply_reward(1, 0.9);
        pool.apply_reward(2, 0.1);  // strictly worst
        pool.apply_reward(3, 0.5);
    }

    SUBCASE("worst pulled prompt goes first") {
        const auto evicted = pool.evict_to_cap(4, 3, 1);
        CHECK(evicted == std::vector<int>{2});
        CHECK(pool.is_evicted(2));
    }
    SUBCASE("the incumbent survives even when worst") {
        const auto evicted = pool.evict_to_cap(4, 3, 2);
        CHECK(evicted == std::vector<int>{3});  // next worst eligible
    }
    SUBCASE("unpulled prompts are untouchable; pool may overflow") {
        const auto evicted = pool.evict_to_cap(2, 3, 1);
        CHECK(evicted == std::vector<int>{2, 3});
        CHECK(pool.active_size() == 3);  // 1, 4, 5 left, still above cap
    }
}

TEST_CASE("batch scheduling walks epochs without replacement") {
    const std::size_t n = 12, batch = 4;
    std::set<std::size_t> first_epoch;
    for (int t = 1; t <= 3; ++t) {
        const auto indices = batch_indices(33, n, batch, t);
        CHECK(indices.size() == batch);
        first_epoch.insert(indices.begin(), indices.end());
    }
    CHECK(first_epoch.size() == n);  // every session exactly once per epoch

    const auto again = batch_indices(33, n, batch, 2);
    CHECK(again == batch_indices(33, n, batch, 2));  // pure in (seed, t)
    CHECK(batch_indices(34, n, batch, 2) != again);

    // epoch 2 is reshuffled relative to epoch 1
    std::vector<std::size_t> epoch1, epoch2;
    for (int t = 1; t <= 3; ++t) {
        const auto a = batch_indices(33, n, batch, t);
        const auto b = batch_indices(33, n, batch, t + 3);
        epoch1.insert(epoch1.end(), a.begin(), a.end());
        epoch2.insert(epoch2.end(), b.begin(), b.end());
    }
    CHECK(epoch1 != epoch2);
    CHECK(std::set<std::size_t>(epoch2.begin(), epoch2.end()).size() == n);
}

TEST_CASE("run_trial on a perfect prompt: full reward, no errors, no additions") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 8);
    MockBackend backend = quality_backend();
    OptimizerConfig cfg = small_config(5);
    cfg.errors_per_trial = 2;

    PromptPool pool;
    const Prompt seed =
        *pool.add("{{q=1.0}} {session} {candidates}", PromptOrigin::Seed, std::nullopt);

    std::vector<const EvalInstance*> batch;
    for (const EvalInstance& instance : instances) batch.push_back(&instance);

    const TrialRecord record = run_trial(backend, seed, batch, catalog, cfg, {}, pool, 1);
    CHECK(record.mean_reward == doctest::Approx(1.0));
    CHECK(record.errors_flagged == 0);
    CHECK(record.prompts_added.empty());
    CHECK(pool.stats(seed.id).pull_count == 1);
    for (const TrialRow& row : record.rows) {
        CHECK(row.target_rank == 1);
        CHECK_FALSE(row.failed);
    }
}

TEST_CASE("flag rate of a q=0 prompt tracks the mock placement distribution") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 400);
    MockBackend backend = quality_backend();
    OptimizerConfig cfg = small_config(1);

    PromptPool pool;
    const Prompt seed =
        *pool.add("{{q=0.0}} {session} {candidates}", PromptOrigin::Seed, std::nullopt);
    std::vector<const EvalInstance*> batch;
    for (const EvalInstance& instance : instances) batch.push_back(&instance);

    const TrialRecord record = run_trial(backend, seed, batch, catalog, cfg, {}, pool, 1);
    // target uniform over ranks 2..20 -> P(rank > 10) = 10/19
    const double flag_rate = static_cast<double>(record.errors_flagged) / 400.0;
    CHECK(flag_rate == doctest::Approx(10.0 / 19.0).epsilon(0.15));
}

TEST_CASE("backend failures zero the session but the trial completes") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 6);

    // Fails exactly one session, answers identity rankings otherwise.
    class FlakyBackend : public Backend {
    public:
        ChatResponse complete(const ChatRequest& req) override {
            if (req.tag.find("session=s2|") != std::string::npos)
                throw TransportError("injected");
            ChatResponse res;
            res.text = "[1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20]";
            return res;
        }
    } backend;

    OptimizerConfig cfg = small_config(1);
    PromptPool pool;
    const Prompt seed = *pool.add("p {session} {candidates}", PromptOrigin::Seed, std::nullopt);
    std::vector<const EvalInstance*> batch;
    for (const EvalInstance& instance : instances) batch.push_back(&instance);

    const TrialRecord record = run_trial(backend, seed, batch, catalog, cfg, {}, pool, 1);
    int failed = 0;
    for (const TrialRow& row : record.rows) {
        if (row.failed) {
            ++failed;
            CHECK(row.session_id == "s2");
            CHECK(row.reward == 0.0);
        }
    }
    CHECK(failed == 1);
}

TEST_CASE("optimize with one trial selects and returns the seed") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 10);
    MockBackend backend = quality_backend();

    const OptimizationResult result =
        optimize(small_config(1), instances, catalog, backend, {kHighPrompt});
    CHECK(result.best_prompt.id == 1);
    CHECK(result.best_prompt.origin == PromptOrigin::Seed);
    CHECK(result.trials.size() == 1);
    CHECK(result.trials[0].prompt_id == 1);
    CHECK(result.stats.at(1).pull_count == 1);
}

TEST_CASE("ucb pull conservation and convergence toward the better arm") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 32);
    MockBackend backend = quality_backend();

    const OptimizationResult result =
        optimize(small_config(60), instances, catalog, backend, {kHighPrompt, kLowPrompt});

    std::int64_t total = 0;
    for (const auto& [id, stats] : result.stats) total += stats.pull_count;
    CHECK(total == 60);  // one pull per trial, archives included

    CHECK(result.best_prompt.id == 1);  // the q=0.9 seed
    CHECK(result.stats.at(1).pull_count > result.stats.at(2).pull_count);
    CHECK(result.stats.at(1).mean() > result.stats.at(2).mean());
}

TEST_CASE("the trial log replays to the same selection sequence") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 16);
    MockBackend backend = quality_backend();
    const OptimizerConfig cfg = small_config(30);

    const OptimizationResult result =
        optimize(cfg, instances, catalog, backend, {kHighPrompt, kLowPrompt});

    // pure bandit simulator over the log: stats come only from logged rewards
    std::map<int, PromptStats> sim;
    sim[1] = {};
    sim[2] = {};
    int t = 0;
    for (const TrialRecord& record : result.trials) {
        ++t;
        CHECK(select_prompt(sim, t, cfg.explore_c) == record.prompt_id);
        sim[record.prompt_id].reward_sum += record.mean_reward;
        sim[record.prompt_id].pull_count += 1;
        for (const Prompt& added : record.prompts_added) sim[added.id] = {};
        for (int id : record.prompts_evicted) sim.erase(id);
    }
}

TEST_CASE("scripted refinement grows the pool and wins") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 24);

    MockScript script;
    script.quality_ranker = true;
    script.by_tag["infer_reason"] = "1. The instruction ignores the session focus";
    script.by_tag["refine_prompt"] =
        "<START>improved {{q=0.8}} {session} {candidates}<END>";
    script.by_tag["augment"] =
        "<START>alt one {{q=0.8}} {session} {candidates}<END>\n"
        "<START>alt two {{q=0.8}} {session} {candidates}<END>\n"
        "<START>alt three {{q=0.8}} {session} {candidates}<END>";
    MockBackend backend(script);

    OptimizerConfig cfg = small_config(40);
    cfg.errors_per_trial = 2;

    const OptimizationResult result =
        optimize(cfg, instances, catalog, backend, {"{{q=0.2}} seed {session} {candidates}"});

    CHECK(result.prompts.size() >= 5);  // seed + refined + 3 variants, deduped
    std::set<std::string> texts;
    for (const Prompt& prompt : result.prompts) CHECK(texts.insert(prompt.text).second);

    const PromptStats& seed_stats = result.stats.at(1);
    const PromptStats& best_stats = result.stats.at(result.best_prompt.id);
    CHECK(result.best_prompt.id != 1);
    CHECK(best_stats.mean() > seed_stats.mean());
    CHECK(result.best_prompt.parent.has_value());

    std::int64_t total = 0;
    for (const auto& [id, stats] : result.stats) {
        total += stats.pull_count;
        CHECK(stats.reward_sum <= static_cast<double>(stats.pull_count) + 1e-9);
    }
    CHECK(total == 40);
}

TEST_CASE("optimize aborts after three fully dead trials") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 6);

    class DeadBackend : public Backend {
    public:
        ChatResponse complete(const ChatRequest&) override { throw TransportError("down"); }
    } backend;

    try {
        optimize(small_config(10), instances, catalog, backend, {kHighPrompt});
        FAIL("expected Aborted");
    } catch (const Aborted& e) {
        CHECK(e.trial == 3);
    }
}

TEST_CASE("persisted runs are deterministic and resume to the same bytes") {
    const Catalog catalog = make_catalog(60);
    const auto instances = make_instances(catalog, 20);
    const OptimizerConfig cfg = small_config(12);

    TempDir dir("opt");
    const auto run = [&](const std::string& name, int max_trials) {
        MockBackend backend = quality_backend();
        OptimizerConfig local = cfg;
        local.max_trials = max_trials;
        const std::string run_dir = (dir.path() / name).string();
        optimize(local, instances, catalog, backend, {kHighPrompt, kLowPrompt}, run_dir);
        return run_dir;
    };

    const std::string a = run("a", 12);
    const std::string b = run("b", 12);
    for (const char* artifact : {"trials.jsonl", "prompts.jsonl", "result.json"}) {
        CAPTURE(artifact);
        CHECK(read_file(std::filesystem::path(a) / artifact) ==
              read_file(std::filesystem::path(b) / artifact));
    }

    // interrupted run: 5 trials now, the rest after a "restart"
    const std::string c = run("c", 5);
    run("c", 12);
    for (const char* artifact : {"trials.jsonl", "prompts.jsonl", "result.json"}) {
        CAPTURE(artifact);
        CHECK(read_file(std::filesystem::path(c) / artifact) ==
              read_file(std::filesystem::path(a) / artifact));
    }

    // torn final line: resume must drop it and still converge to the same bytes
    const std::string d = run("d", 7);
    const std::string full = read_file(std::filesystem::path(d) / "trials.jsonl");
    const std::size_t last_line_start = full.rfind('\n', full.size() - 2) + 1;
    write_file(std::filesystem::path(d) / "trials.jsonl",
               full.substr(0, last_line_start) + "{\"trial\":7,\"truncated");
    run("d", 12);
    CHECK(read_file(std::filesystem::path(d) / "trials.jsonl") ==
          read_file(std::filesystem::path(a) / "trials.jsonl"));
    CHECK(read_file(std::filesystem::path(d) / "result.json") ==
          read_file(std::filesystem::path(a) / "result.json"));
}
