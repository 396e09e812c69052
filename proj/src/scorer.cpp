#include "ecorank/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

std::set<std::string> tokenize(std::string_view text) {
    std::set<std::string> tokens;
    std::string current;
    for (char c : text) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current += static_cast<char>(std::tolower(uc));
        } else if (!current.empty()) {
            tokens.insert(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.insert(current);
    return tokens;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const std::string& t : a) inter += b.count(t);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Second " | " field of a rendered item, with any trailing [ECO] removed.
std::string rendered_category(std::string_view text) {
    const std::string_view sep = " | ";
    std::size_t first = text.find(sep);
    if (first == std::string_view::npos) return {};
    std::size_t start = first + sep.size();
    std::size_t second = text.find(sep, start);
    std::string_view field =
        second == std::string_view::npos ? text.substr(start) : text.substr(start, second - start);
    const std::string_view eco = " [ECO]";
    if (field.size() >= eco.size() && field.substr(field.size() - eco.size()) == eco)
        field.remove_suffix(eco.size());
    return std::string(field);
}

}  // namespace

double lexical_pair_score(const std::string& a, const std::string& b) {
    const double overlap = jaccard(tokenize(a), tokenize(b));
    const bool same_category = rendered_category(a) == rendered_category(b);
    return 0.75 * overlap + 0.25 * (same_category ? 1.0 : 0.0);
}

std::vector<double> LexicalScorer::score_pairs(const std::vector<TextPair>& pairs) {
    std::vector<double> scores(pairs.size());
    const std::int64_t n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] =
            lexical_pair_score(pairs[static_cast<std::size_t>(i)].first,
                               pairs[static_cast<std::size_t>(i)].second);
    }
    return scores;
}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host:port
    std::string path;  // /score
};

SplitUrl split_url(const std::string& url) {
    std::size_t scheme = url.find("://");
    std::size_t path_start =
        scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::vector<double> RemoteScorer::score_pairs(const std::vector<TextPair>& pairs) {
    std::vector<double> scores;
    scores.reserve(pairs.size());

    const SplitUrl url = split_url(cfg_.endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

    for (std::size_t offset = 0; offset < pairs.size(); offset += cfg_.max_batch) {
        const std::size_t end = std::min(pairs.size(), offset + cfg_.max_batch);
        nlohmann::json body;
        body["pairs"] = nlohmann::json::array();
        for (std::size_t i = offset; i < end; ++i)
            body["pairs"].push_back({pairs[i].first, pairs[i].second});

        httplib::Result res = client.Post(url.path, body.dump(), "application/json");
        if (!res) throw ScorerFailure("no response from " + cfg_.endpoint);
        if (res->status != 200)
            throw ScorerFailure("status " + std::to_string(res->status) + " from scorer");

        nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("scores") || !parsed["scores"].is_array())
            throw ScorerFailure("scorer response missing \"scores\" array");
        const nlohmann::json& arr = parsed["scores"];
        if (arr.size() != end - offset)
            throw ScorerFailure("scorer returned " + std::to_string(arr.size()) +
                                " scores for " + std::to_string(end - offset) + " pairs");
        for (const nlohmann::json& v : arr) {
            if (!v.is_number()) throw ScorerFailure("non-numeric score in response");
            double s = v.get<double>();
            if (!std::isfinite(s)) throw ScorerFailure("non-finite score in response");
            scores.push_back(std::clamp(s, 0.0, 1.0));
        }
    }
    return scores;
}

std::unique_ptr<Scorer> make_lexical_scorer() { return std::make_unique<LexicalScorer>(); }

std::unique_ptr<Scorer> make_remote_scorer(RemoteScorerConfig cfg) {
    return std::make_unique<RemoteScorer>(std::move(cfg));
}

}  // namespace ecorank
