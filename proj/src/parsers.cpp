#include "ecorank/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

// "3. entry", "3) entry", "3: entry" -> entry; rejects everything else.
std::optional<std::string> numbered_line_content(const std::string& line) {
    std::size_t i = line.find_first_not_of(" \t");
    if (i == std::string::npos || !std::isdigit(static_cast<unsigned char>(line[i])))
        return std::nullopt;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size() || (line[i] != '.' && line[i] != ')' && line[i] != ':'))
        return std::nullopt;
    ++i;
    std::string content = trim(line.substr(i));
    if (content.empty()) return std::nullopt;
    return content;
}

struct CandidateLookup {
    const std::vector<std::string>& ids;
    std::unordered_map<std::string, std::size_t> by_id;
    std::unordered_map<std::string, std::size_t> by_label;

    CandidateLookup(const std::vector<std::string>& candidate_ids,
                    const std::vector<std::string>& labels)
        : ids(candidate_ids) {
        for (std::size_t i = 0; i < ids.size(); ++i) by_id.emplace(ids[i], i);
        for (std::size_t i = 0; i < labels.size() && i < ids.size(); ++i) {
            by_label.emplace(labels[i], i);
            // completions often echo just the title, the first rendered field
            std::size_t sep = labels[i].find(" | ");
            if (sep != std::string::npos) by_label.emplace(labels[i].substr(0, sep), i);
        }
    }

    // Candidate position for one extracted entry, or nullopt.
    std::optional<std::size_t> resolve(const std::string& entry) const {
        const std::string cleaned = trim(entry);
        if (cleaned.empty()) return std::nullopt;
        bool numeric = std::all_of(cleaned.begin(), cleaned.end(), [](unsigned char c) {
            return std::isdigit(c);
        });
        if (numeric) {
            unsigned long idx = std::stoul(cleaned);
            if (idx >= 1 && idx <= ids.size()) return idx - 1;
            // fall through: a numeric string might still be an item id
        }
        if (auto it = by_id.find(cleaned); it != by_id.end()) return it->second;
        if (auto it = by_label.find(cleaned); it != by_label.end()) return it->second;
        return std::nullopt;
    }

    std::optional<std::size_t> resolve_index(long idx) const {
        if (idx >= 1 && static_cast<unsigned long>(idx) <= ids.size())
            return static_cast<std::size_t>(idx - 1);
        return std::nullopt;
    }
};

// First JSON array in the text that resolves to at least one candidate.
// Flat arrays rarely contain ']' except inside strings, so from each '['
// we try successive closing brackets until one parses.
std::vector<std::size_t> positions_from_json(const std::string& text,
                                             const CandidateLookup& lookup,
                                             bool& saw_unresolved) {
    for (std::size_t open = text.find('['); open != std::string::npos;
         open = text.find('[', open + 1)) {
        std::size_t close = open;
        for (int attempts = 0; attempts < 64; ++attempts) {
            close = text.find(']', close + 1);
            if (close == std::string::npos) break;
            json parsed = json::parse(text.substr(open, close - open + 1), nullptr, false);
            if (parsed.is_discarded()) continue;
            if (!parsed.is_array()) break;

            std::vector<std::size_t> positions;
            bool unresolved = false;
            for (const json& entry : parsed) {
                std::optional<std::size_t> pos;
                if (entry.is_number_integer())
                    pos = lookup.resolve_index(entry.get<long>());
                else if (entry.is_string())
                    pos = lookup.resolve(entry.get<std::string>());
                else
                    unresolved = true;
                if (pos)
                    positions.push_back(*pos);
                else
                    unresolved = true;
            }
            if (!positions.empty()) {
                saw_unresolved = unresolved;
                return positions;
            }
            break;  // a parsed array with zero hits: try the next '['
        }
    }
    return {};
}

std::vector<std::size_t> positions_from_numbered_lines(const std::string& text,
                                                       const CandidateLookup& lookup,
                                                       bool& saw_unresolved) {
    std::vector<std::size_t> positions;
    for (const std::string& line : split_lines(text)) {
        auto content = numbered_line_content(line);
        if (!content) continue;
        if (auto pos = lookup.resolve(*content))
            positions.push_back(*pos);
        else
            saw_unresolved = true;
    }
    return positions;
}

}  // namespace

RankedList parse_ranked_list(const std::string& text,
                             const std::vector<std::string>& candidate_ids,
                             const std::vector<std::string>& candidate_labels) {
    if (candidate_ids.empty()) throw Unparseable("empty candidate set");
    const CandidateLookup lookup(candidate_ids, candidate_labels);

    bool saw_unresolved = false;
    std::vector<std::size_t> positions = positions_from_json(text, lookup, saw_unresolved);
    if (positions.empty()) {
        saw_unresolved = false;
        positions = positions_from_numbered_lines(text, lookup, saw_unresolved);
    }
    if (positions.empty()) throw Unparseable(text.substr(0, 120));

    RankedList out;
    bool repaired = saw_unresolved;

    std::vector<bool> used(candidate_ids.size(), false);
    for (std::size_t pos : positions) {
        if (used[pos]) {
            repaired = true;  // duplicate dropped
            continue;
        }
        used[pos] = true;
        out.order.push_back(candidate_ids[pos]);
    }
    for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
        if (!used[i]) {
            repaired = true;  // missing candidate appended
            out.order.push_back(candidate_ids[i]);
        }
    }
    out.repaired = repaired;
    return out;
}

std::string extract_tagged(const std::string& text, const std::string& start_tag,
                           const std::string& end_tag) {
    std::size_t start = text.find(start_tag);
    if (start == std::string::npos) throw TagNotFound(start_tag, end_tag);
    start += start_tag.size();
    std::size_t end = text.find(end_tag, start);
    if (end == std::string::npos) throw TagNotFound(start_tag, end_tag);
    return trim(text.substr(start, end - start));
}

std::vector<std::string> parse_variants(const std::string& text, const std::string& start_tag,
                                        const std::string& end_tag) {
    std::vector<std::string> variants;
    std::size_t cursor = 0;
    while (true) {
        std::size_t start = text.find(start_tag, cursor);
        if (start == std::string::npos) break;
        start += start_tag.size();
        std::size_t end = text.find(end_tag, start);
        if (end == std::string::npos) break;
        std::string block = trim(text.substr(start, end - start));
        if (!block.empty()) variants.push_back(std::move(block));
        cursor = end + end_tag.size();
    }

    if (variants.empty()) {
        for (const std::string& line : split_lines(text)) {
            if (auto content = numbered_line_content(line)) variants.push_back(*content);
        }
    }

    std::vector<std::string> unique;
    std::unordered_set<std::string> seen;
    for (std::string& v : variants) {
        if (seen.insert(v).second) unique.push_back(std::move(v));
    }
    if (unique.empty()) throw NoVariants();
    return unique;
}

}  // namespace ecorank
