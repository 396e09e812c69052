#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecorank/llm_backend.hpp"
#include "ecorank/optimizer.hpp"
#include "ecorank/scorer.hpp"

namespace ecorank {

enum class ScorerKind { Lexical, Remote };

// Declarative run configuration: a TOML-style sectioned key/value file
// plus CLI flag overrides. One hash of the canonical serialization names
// auto-created run directories.
struct RunConfig {
    // [paths]
    std::string catalog_path;
    std::string sessions_train_path;
    std::string sessions_valid_path;  // optional
    std::string sessions_test_path;
    std::string run_dir;  // empty -> runs/<config hash>

    // [ingest]
    std::size_t n_initial = 100;
    std::uint64_t seed = 42;

    // [reranker]
    std::size_t k_filter = 20;
    ScorerKind scorer = ScorerKind::Lexical;
    std::string remote_endpoint;

    // [backend]
    BackendConfig backend;
    bool trace = false;

    // [optimizer]
    OptimizerConfig optimizer;
    std::string seed_prompt_path;  // empty -> built-in default prompt

    // [metrics]
    std::vector<std::size_t> cutoffs = {1, 5};

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);

    // Canonical form: fixed section and key order, so parse(serialize(x))
    // round-trips and the hash is stable.
    std::string serialize() const;
    std::string hash() const;

    // Structural checks only (n_initial > k_filter >= max cutoff, enums
    // in range); file existence is checked per command.
    void validate() const;

    std::string resolved_run_dir() const;
};

const char* to_string(ScorerKind kind);
ScorerKind scorer_kind_from_string(const std::string& s);
const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

}  // namespace ecorank
