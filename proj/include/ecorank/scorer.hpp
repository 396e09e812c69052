#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ecorank {

using TextPair = std::pair<std::string, std::string>;

// Relevance model over two rendered item texts. Implementations must be
// deterministic: the same pair of texts always yields the same score in [0,1].
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::vector<double> score_pairs(const std::vector<TextPair>& pairs) = 0;

    // True when score_pairs may be called from multiple threads at once.
    virtual bool thread_safe() const = 0;

    double score_pair(const std::string& a, const std::string& b) {
        return score_pairs({{a, b}})[0];
    }
};

// Serial scalar reference for the lexical score. Kept separate from the
// batched kernel so tests can check the two paths against each other:
//   score = 0.75 * Jaccard(token sets) + 0.25 * [categories equal]
// Tokens are lowercased with punctuation stripped; the category is the
// second " | " field of the rendered text, minus a trailing [ECO] marker.
double lexical_pair_score(const std::string& a, const std::string& b);

// Dependency-free reference scorer; the batch path fans out over pairs
// with OpenMP.
class LexicalScorer : public Scorer {
public:
    std::vector<double> score_pairs(const std::vector<TextPair>& pairs) override;
    bool thread_safe() const override { return true; }
};

struct RemoteScorerConfig {
    std::string endpoint;        // e.g. http://localhost:9100/score
    int timeout_ms = 30000;
    std::size_t max_batch = 256; // pairs per POST
};

// Posts {"pairs":[[s,c],...]} and expects {"scores":[...]} back. Drop-in
// path to a neural cross-encoder served over HTTP; scores are clamped to
// [0,1], anything else (size mismatch, non-numbers) is a ScorerFailure.
class RemoteScorer : public Scorer {
public:
    explicit RemoteScorer(RemoteScorerConfig cfg) : cfg_(std::move(cfg)) {}

    std::vector<double> score_pairs(const std::vector<TextPair>& pairs) override;
    bool thread_safe() const override { return false; }

private:
    RemoteScorerConfig cfg_;
};

std::unique_ptr<Scorer> make_lexical_scorer();
std::unique_ptr<Scorer> make_remote_scorer(RemoteScorerConfig cfg);

}  // namespace ecorank
