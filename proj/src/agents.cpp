#include "ecorank/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ecorank/errors.hpp"
#include "ecorank/parsers.hpp"

namespace ecorank {

const char* const DEFAULT_SEED_PROMPT =
    "You are ranking products for a shopping session.\n"
    "\n"
    "Recent items the user interacted with, oldest first:\n"
    "{session}\n"
    "\n"
    "Candidate products:\n"
    "{candidates}\n"
    "\n"
    "Infer what the user is looking for from the session, paying attention to\n"
    "recent items. When a candidate marked [ECO] fits that intent equally well,\n"
    "prefer it. Rank ALL candidates from most to least likely to be chosen next.\n"
    "\n"
    "Answer with a single JSON array of the candidate numbers, best first, for\n"
    "example [4, 1, 7]. Include every candidate number exactly once.\n";

bool has_placeholders(const std::string& text) {
    return text.find(SESSION_PLACEHOLDER) != std::string::npos &&
           text.find(CANDIDATES_PLACEHOLDER) != std::string::npos;
}

namespace {

void replace_all(std::string& text, std::string_view from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string numbered(const std::vector<std::string>& entries) {
    std::string out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i) out += '\n';
        out += std::to_string(i + 1);
        out += ". ";
        out += entries[i];
    }
    return out;
}

}  // namespace

std::string numbered_items(const std::vector<std::string>& ids, const Catalog& catalog,
                           bool include_green) {
    std::vector<std::string> rendered;
    rendered.reserve(ids.size());
    for (const std::string& id : ids) rendered.push_back(render_item(catalog.at(id), include_green));
    return numbered(rendered);
}

std::string render_prompt(const std::string& prompt_text, const Session& session,
                          const CandidateSet& c_filter, const Catalog& catalog,
                          bool include_green) {
    std::string out = prompt_text;
    replace_all(out, SESSION_PLACEHOLDER,
                numbered_items(session.interactions, catalog, include_green));
    replace_all(out, CANDIDATES_PLACEHOLDER,
                numbered_items(c_filter.candidates, catalog, include_green));
    return out;
}

RankedList evaluate(Backend& backend, const Prompt& prompt, const Session& session,
                    const CandidateSet& c_filter, const Catalog& catalog,
                    const AgentOptions& opts) {
    ChatRequest req;
    req.user = render_prompt(prompt.text, session, c_filter, catalog, opts.include_green);
    req.temperature = opts.eval_temperature;
    req.max_tokens = opts.eval_max_tokens;

    std::size_t target_index = 0;  // 1-based; 0 = target not among candidates
    std::vector<std::string> labels;
    labels.reserve(c_filter.candidates.size());
    for (std::size_t i = 0; i < c_filter.candidates.size(); ++i) {
        labels.push_back(render_item(catalog.at(c_filter.candidates[i]), opts.include_green));
        if (c_filter.candidates[i] == session.target) target_index = i + 1;
    }
    req.tag = "evaluate|session=" + session.session_id + "|prompt=" + std::to_string(prompt.id) +
              "|target=" + std::to_string(target_index) +
              "|n=" + std::to_string(c_filter.candidates.size());

    const ChatResponse res = backend.complete(req);
    RankedList ranked = parse_ranked_list(res.text, c_filter.candidates, labels);
    ranked.session_id = session.session_id;
    return ranked;
}

std::optional<ErrorCase> detect_error(const RankedList& ranked, const std::string& target,
                                      std::size_t threshold, int prompt_id) {
    std::size_t rank = ranked.rank_of(target);
    if (rank == 0) rank = ranked.order.size() + 1;
    if (rank <= threshold) return std::nullopt;
    ErrorCase error;
    error.session_id = ranked.session_id;
    error.prompt_id = prompt_id;
    error.target_rank = rank;
    error.threshold = threshold;
    error.repaired = ranked.repaired;
    return error;
}

ReasonList infer_reason(Backend& backend, const Prompt& prompt, const ErrorCase& error,
                        const Session& session, const CandidateSet& c_filter,
                        const Catalog& catalog, const RankedList* ranked,
                        const AgentOptions& opts) {
    // Showing the head of the bad ranking is enough context for reflection.
    const std::vector<std::string>& shown =
        ranked != nullptr ? ranked->order : c_filter.candidates;
    std::vector<std::string> top;
    const std::size_t n_top = std::min<std::size_t>(5, shown.size());
    for (std::size_t i = 0; i < n_top; ++i)
        top.push_back(render_item(catalog.at(shown[i]), opts.include_green));

    ChatRequest req;
    req.user = "A ranking instruction failed for a shopping session.\n\n"
               "Instruction:\n" +
               prompt.text +
               "\n\n"
               "Session items, oldest first:\n" +
               numbered_items(session.interactions, catalog, opts.include_green) +
               "\n\n"
               "The correct next item was ranked at position " +
               std::to_string(error.target_rank) + " of " +
               std::to_string(c_filter.candidates.size()) +
               ".\n"
               "Top of the produced ranking:\n" +
               numbered(top) +
               "\n\n"
               "List up to " +
               std::to_string(opts.max_reasons) +
               " short hypotheses explaining why the instruction ranked the\n"
               "correct item so low. Answer as a numbered list, one hypothesis per line.\n";
    req.temperature = opts.reflect_temperature;
    req.max_tokens = opts.reflect_max_tokens;
    req.tag = "infer_reason|session=" + error.session_id +
              "|prompt=" + std::to_string(prompt.id);

    const ChatResponse res = backend.complete(req);
    std::vector<std::string> hypotheses;
    try {
        hypotheses = parse_variants(res.text, "<START>", "<END>");
    } catch (const NoVariants&) {
        throw NoReasons();
    }
    if (hypotheses.size() > opts.max_reasons) hypotheses.resize(opts.max_reasons);
    return ReasonList{std::move(hypotheses)};
}

Prompt refine_prompt(Backend& backend, const Prompt& prompt, const ReasonList& reasons,
                     const AgentOptions& opts) {
    ChatRequest req;
    req.user = "Improve a product-ranking instruction.\n\n"
               "Current instruction:\n" +
               prompt.text +
               "\n\n"
               "Observed failure hypotheses:\n" +
               numbered(reasons.hypotheses) +
               "\n\n"
               "Write one improved instruction that addresses the hypotheses. Keep the\n"
               "{session} and {candidates} placeholders. Return the instruction between\n"
               "<START> and <END> tags.\n";
    req.temperature = opts.reflect_temperature;
    req.max_tokens = opts.reflect_max_tokens;
    req.tag = "refine_prompt|prompt=" + std::to_string(prompt.id);

    const ChatResponse res = backend.complete(req);
    std::string text = extract_tagged(res.text);
    if (!has_placeholders(text)) throw MissingPlaceholders(text);

    Prompt refined;
    refined.text = std::move(text);
    refined.parent = prompt.id;
    refined.origin = PromptOrigin::Refined;
    return refined;
}

std::vector<Prompt> augment(Backend& backend, const Prompt& prompt, std::size_t n_variants,
                            const AgentOptions& opts) {
    n_variants = std::clamp<std::size_t>(n_variants, 3, 5);

    ChatRequest req;
    req.user = "Rewrite the following instruction " + std::to_string(n_variants) +
               " different ways, preserving its meaning\n"
               "and keeping the {session} and {candidates} placeholders intact.\n\n"
               "Instruction:\n" +
               prompt.text +
               "\n\n"
               "Return each version between <START> and <END> tags.\n";
    req.temperature = opts.reflect_temperature;
    req.max_tokens = opts.reflect_max_tokens * 2;
    req.tag = "augment|prompt=" + std::to_string(prompt.id);

    const ChatResponse res = backend.complete(req);
    std::vector<Prompt> variants;
    for (std::string& text : parse_variants(res.text)) {
        if (!has_placeholders(text)) continue;
        Prompt variant;
        variant.text = std::move(text);
        variant.parent = prompt.id;
        variant.origin = PromptOrigin::Variant;
        variants.push_back(std::move(variant));
    }
    if (variants.empty()) throw NoVariants();
    return variants;
}

double ucb_value(const PromptStats& stats, std::int64_t t, double c) {
    if (stats.pull_count == 0) return std::numeric_limits<double>::infinity();
    const double pulls = static_cast<double>(stats.pull_count);
    return stats.reward_sum / pulls +
           c * std::sqrt(std::log(static_cast<double>(t)) / pulls);
}

int select_prompt(const std::map<int, PromptStats>& pool, std::int64_t t, double c) {
    if (pool.empty()) throw std::invalid_argument("select_prompt: empty pool");
    int best_id = pool.begin()->first;
    double best_value = -std::numeric_limits<double>::infinity();
    for (const auto& [id, stats] : pool) {
        const double value = ucb_value(stats, t, c);
        if (value > best_value) {  // strict: ties keep the lowest (oldest) id
            best_value = value;
            best_id = id;
        }
    }
    return best_id;
}

}  // namespace ecorank
