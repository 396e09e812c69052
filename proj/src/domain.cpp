#include "ecorank/domain.hpp"

#include <stdexcept>

#include "ecorank/errors.hpp"

namespace ecorank {

void Catalog::add(Item item) {
    if (index_.count(item.id)) throw DuplicateId(item.id);
    index_.emplace(item.id, items_.size());
    items_.push_back(std::move(item));
}

const Item& Catalog::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown item id: " + id);
    return items_[it->second];
}

const Item* Catalog::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

std::size_t Catalog::position_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown item id: " + id);
    return it->second;
}

std::size_t RankedList::rank_of(const std::string& id) const {
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] == id) return i + 1;
    }
    return 0;
}

const char* to_string(CandidateKind kind) {
    return kind == CandidateKind::Initial ? "initial" : "filtered";
}

const char* to_string(PromptOrigin origin) {
    switch (origin) {
        case PromptOrigin::Seed: return "seed";
        case PromptOrigin::Refined: return "refined";
        case PromptOrigin::Variant: return "variant";
    }
    return "seed";
}

CandidateKind candidate_kind_from_string(const std::string& s) {
    if (s == "initial") return CandidateKind::Initial;
    if (s == "filtered") return CandidateKind::Filtered;
    throw std::invalid_argument("unknown candidate kind: " + s);
}

PromptOrigin prompt_origin_from_string(const std::string& s) {
    if (s == "seed") return PromptOrigin::Seed;
    if (s == "refined") return PromptOrigin::Refined;
    if (s == "variant") return PromptOrigin::Variant;
    throw std::invalid_argument("unknown prompt origin: " + s);
}

std::string render_item(const Item& item, bool include_green) {
    std::string out = item.title;
    out += " | ";
    out += item.category;
    if (!item.attributes.empty()) {
        out += " | ";
        bool first = true;
        for (const auto& [name, value] : item.attributes) {
            if (!first) out += "; ";
            out += name;
            out += "=";
            out += value;
            first = false;
        }
    }
    if (include_green && item.sustainable) out += " [ECO]";
    return out;
}

}  // namespace ecorank
