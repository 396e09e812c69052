#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ecorank {

// A product record. `attributes` keeps the order of the catalog file so
// rendering stays byte-stable. `sustainable` marks eco-labelled products;
// the label comes from the catalog file, it is never inferred at runtime.
struct Item {
    std::string id;
    std::string title;
    std::string category;
    std::vector<std::pair<std::string, std::string>> attributes;
    bool sustainable = false;
};

class Catalog {
public:
    // Throws DuplicateId if the id is already present.
    void add(Item item);

    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const Item& at(const std::string& id) const;
    const Item* find(const std::string& id) const;

    std::size_t size() const { return items_.size(); }
    const std::vector<Item>& items() const { return items_; }
    // Position of an id in catalog order; catalog must contain it.
    std::size_t position_of(const std::string& id) const;

private:
    std::vector<Item> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// A chronological interaction sequence plus the held-out item the user
// eventually picked. The target need not appear in `interactions`.
struct Session {
    std::string session_id;
    std::vector<std::string> interactions;
    std::string target;
};

enum class CandidateKind { Initial, Filtered };

struct CandidateSet {
    std::string session_id;
    std::vector<std::string> candidates;
    CandidateKind kind = CandidateKind::Initial;
};

// Output of one ranking pass: a full permutation of the candidate ids it
// was asked to order. `repaired` is true when parser repair rules fired.
struct RankedList {
    std::string session_id;
    std::vector<std::string> order;
    bool repaired = false;

    // 1-based rank of `id`, or 0 when absent.
    std::size_t rank_of(const std::string& id) const;
};

enum class PromptOrigin { Seed, Refined, Variant };

struct Prompt {
    int id = 0;  // 0 = not yet registered in a pool
    std::string text;
    std::optional<int> parent;
    PromptOrigin origin = PromptOrigin::Seed;
};

// Bandit accounting for one prompt. Per-pull rewards live in [0,1], so
// reward_sum <= pull_count always holds.
struct PromptStats {
    double reward_sum = 0.0;
    std::int64_t pull_count = 0;

    double mean() const {
        return pull_count == 0 ? 0.0 : reward_sum / static_cast<double>(pull_count);
    }
};

const char* to_string(CandidateKind kind);
const char* to_string(PromptOrigin origin);
CandidateKind candidate_kind_from_string(const std::string& s);
PromptOrigin prompt_origin_from_string(const std::string& s);

// Single-line deterministic rendering used both in prompts and by the
// lexical scorer:
//   <title> | <category> | a=1; b=2 [ECO]
// The [ECO] token appears iff include_green and the item is sustainable.
std::string render_item(const Item& item, bool include_green);

}  // namespace ecorank
