#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecorank/domain.hpp"
#include "ecorank/llm_backend.hpp"

namespace ecorank {

// A flagged ranking failure: the target landed outside the top `threshold`
// (absent targets count as rank |candidates|+1).
struct ErrorCase {
    std::string session_id;
    int prompt_id = 0;
    std::size_t target_rank = 0;
    std::size_t threshold = 0;
    bool repaired = false;
};

struct ReasonList {
    std::vector<std::string> hypotheses;
};

struct AgentOptions {
    bool include_green = true;
    double eval_temperature = 0.2;      // ranking should be stable
    double reflect_temperature = 0.8;   // reflection/rewrites want diversity
    int eval_max_tokens = 256;
    int reflect_max_tokens = 512;
    std::size_t max_reasons = 5;
};

inline constexpr std::string_view SESSION_PLACEHOLDER = "{session}";
inline constexpr std::string_view CANDIDATES_PLACEHOLDER = "{candidates}";

// Default ranking instruction; prompts/seed_prompt.txt carries the same text.
extern const char* const DEFAULT_SEED_PROMPT;

bool has_placeholders(const std::string& text);

// "1. <rendered item>\n2. ..." without a trailing newline.
std::string numbered_items(const std::vector<std::string>& ids, const Catalog& catalog,
                           bool include_green);

// Substitutes every {session} and {candidates} occurrence in the prompt text.
std::string render_prompt(const std::string& prompt_text, const Session& session,
                          const CandidateSet& c_filter, const Catalog& catalog,
                          bool include_green);

// Ranks the filtered candidates with one completion; parser repair makes
// the result a full permutation.
RankedList evaluate(Backend& backend, const Prompt& prompt, const Session& session,
                    const CandidateSet& c_filter, const Catalog& catalog,
                    const AgentOptions& opts = {});

// Flags iff rank(target) > threshold, strictly.
std::optional<ErrorCase> detect_error(const RankedList& ranked, const std::string& target,
                                      std::size_t threshold = 10, int prompt_id = 0);

// Self-reflection over a flagged failure; 1..max_reasons hypotheses. The
// failed ranking supplies the "top of the produced ranking" context
// (candidate order stands in when it is absent).
ReasonList infer_reason(Backend& backend, const Prompt& prompt, const ErrorCase& error,
                        const Session& session, const CandidateSet& c_filter,
                        const Catalog& catalog, const RankedList* ranked = nullptr,
                        const AgentOptions& opts = {});

// Rewrites the prompt to address the hypotheses. The result must keep both
// placeholders, arrives between <START>/<END> tags, and records its parent.
Prompt refine_prompt(Backend& backend, const Prompt& prompt, const ReasonList& reasons,
                     const AgentOptions& opts = {});

// 3..5 paraphrases of the prompt; variants that lose a placeholder are
// dropped, duplicates collapse, survivors may number fewer than requested.
std::vector<Prompt> augment(Backend& backend, const Prompt& prompt, std::size_t n_variants,
                            const AgentOptions& opts = {});

// Upper confidence bound: +inf for unpulled prompts, otherwise
// mean + c * sqrt(ln(t) / pulls).
double ucb_value(const PromptStats& stats, std::int64_t t, double c);

// Arm with the highest UCB value; ties (including several +inf) go to the
// lowest prompt id.
int select_prompt(const std::map<int, PromptStats>& pool, std::int64_t t, double c);

}  // namespace ecorank
