#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecorank/domain.hpp"
#include "ecorank/rng.hpp"
#include "ecorank/scorer.hpp"

namespace ecorank::test {

inline Item make_item(std::string id, std::string title, std::string category,
                      std::vector<std::pair<std::string, std::string>> attrs = {},
                      bool sustainable = false) {
    Item item;
    item.id = std::move(id);
    item.title = std::move(title);
    item.category = std::move(category);
    item.attributes = std::move(attrs);
    item.sustainable = sustainable;
    return item;
}

// n items "i0".."i<n-1>" with varied titles/categories; every
// `sustainable_every`-th item carries the eco flag.
inline Catalog make_catalog(std::size_t n, std::size_t sustainable_every = 5) {
    static const char* words[] = {"bamboo", "steel",  "cotton", "solar",  "lamp",  "chair",
                                  "bottle", "jacket", "phone",  "paper",  "cable", "mug",
                                  "desk",   "shoe",   "tent",   "watch",  "board", "pan"};
    static const char* categories[] = {"Home", "Games", "Outdoors", "Office", "Clothing"};
    Catalog catalog;
    Rng rng(977);
    for (std::size_t i = 0; i < n; ++i) {
        Item item;
        item.id = "i" + std::to_string(i);
        item.title = std::string(words[rng.next_below(18)]) + " " +
                     words[rng.next_below(18)] + " " + std::to_string(i);
        item.category = categories[i % 5];
        item.sustainable = sustainable_every != 0 && i % sustainable_every == 0;
        catalog.add(std::move(item));
    }
    return catalog;
}

inline Session make_session(std::string id, std::vector<std::string> interactions,
                            std::string target) {
    return Session{std::move(id), std::move(interactions), std::move(target)};
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& label) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ecorank_" + label + "_" + std::to_string(++counter));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Scores looked up from a table (exact text pair), with a fallback.
class TableScorer : public Scorer {
public:
    explicit TableScorer(double fallback = 0.0) : fallback_(fallback) {}

    void set(const std::string& a, const std::string& b, double score) {
        table_[{a, b}] = score;
    }

    std::vector<double> score_pairs(const std::vector<TextPair>& pairs) override {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const TextPair& pair : pairs) {
            auto it = table_.find(pair);
            out.push_back(it == table_.end() ? fallback_ : it->second);
        }
        return out;
    }
    bool thread_safe() const override { return true; }

private:
    std::map<TextPair, double> table_;
    double fallback_;
};

// Deterministic pseudo-random scores derived from the pair's text. `levels`
// > 0 quantizes scores to force ties.
class HashScorer : public Scorer {
public:
    explicit HashScorer(std::uint64_t salt = 0, int levels = 0)
        : salt_(salt), levels_(levels) {}

    std::vector<double> score_pairs(const std::vector<TextPair>& pairs) override {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const TextPair& pair : pairs) {
            std::uint64_t h = Rng::fnv1a64(pair.first + "\x1f" + pair.second) ^ salt_;
            double score = static_cast<double>(h >> 11) * 0x1.0p-53;
            if (levels_ > 0)
                score = static_cast<double>(static_cast<int>(score * levels_)) / levels_;
            out.push_back(score);
        }
        return out;
    }
    bool thread_safe() const override { return true; }

private:
    std::uint64_t salt_;
    int levels_;
};

}  // namespace ecorank::test
