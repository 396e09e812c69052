#include "ecorank/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ecorank/errors.hpp"
#include "ecorank/rng.hpp"

namespace ecorank {

const char* to_string(ScorerKind kind) {
    return kind == ScorerKind::Lexical ? "lexical" : "remote";
}

ScorerKind scorer_kind_from_string(const std::string& s) {
    if (s == "lexical") return ScorerKind::Lexical;
    if (s == "remote") return ScorerKind::Remote;
    throw ConfigError("unknown scorer kind: " + s);
}

const char* to_string(BackendKind kind) { return kind == BackendKind::Http ? "http" : "mock"; }

BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "http") return BackendKind::Http;
    if (s == "mock") return BackendKind::Mock;
    throw ConfigError("unknown backend kind: " + s);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

// section.key -> raw value text
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text) {
    KvMap kv;
    std::string section;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside quotes
        bool in_quotes = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quotes = !in_quotes;
            if (line[i] == '#' && !in_quotes) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("bad section header at line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("empty key or value at line " + std::to_string(line_no));
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

std::string get_str(const KvMap& kv, const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : unquote(it->second);
}

long long get_int(const KvMap& kv, const std::string& key, long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoll(unquote(it->second));
    } catch (const std::exception&) {
        throw ConfigError("not an integer: " + key + " = " + it->second);
    }
}

double get_double(const KvMap& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(unquote(it->second));
    } catch (const std::exception&) {
        throw ConfigError("not a number: " + key + " = " + it->second);
    }
}

bool get_bool(const KvMap& kv, const std::string& key, bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const std::string v = unquote(it->second);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("not a boolean: " + key + " = " + it->second);
}

std::vector<std::size_t> get_int_array(const KvMap& kv, const std::string& key,
                                       std::vector<std::size_t> fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const std::string& raw = it->second;
    if (raw.front() != '[' || raw.back() != ']')
        throw ConfigError("expected [a, b, ...] for " + key);
    std::vector<std::size_t> out;
    std::string body = raw.substr(1, raw.size() - 2);
    std::istringstream parts(body);
    std::string part;
    while (std::getline(parts, part, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(part)));
        } catch (const std::exception&) {
            throw ConfigError("bad array entry in " + key + ": " + part);
        }
    }
    if (out.empty()) throw ConfigError("empty array for " + key);
    return out;
}

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
    const KvMap kv = parse_kv(text);
    RunConfig cfg;

    cfg.catalog_path = get_str(kv, "paths.catalog", "");
    cfg.sessions_train_path = get_str(kv, "paths.sessions_train", "");
    cfg.sessions_valid_path = get_str(kv, "paths.sessions_valid", "");
    cfg.sessions_test_path = get_str(kv, "paths.sessions_test", "");
    cfg.run_dir = get_str(kv, "paths.run_dir", "");

    cfg.n_initial = static_cast<std::size_t>(get_int(kv, "ingest.n_initial", 100));
    cfg.seed = static_cast<std::uint64_t>(get_int(kv, "ingest.seed", 42));

    cfg.k_filter = static_cast<std::size_t>(get_int(kv, "reranker.k_filter", 20));
    cfg.scorer = scorer_kind_from_string(get_str(kv, "reranker.scorer", "lexical"));
    cfg.remote_endpoint = get_str(kv, "reranker.remote_endpoint", "");

    cfg.backend.kind = backend_kind_from_string(get_str(kv, "backend.kind", "mock"));
    cfg.backend.endpoint = get_str(kv, "backend.endpoint", "");
    cfg.backend.model = get_str(kv, "backend.model", "meta-llama-3");
    cfg.backend.timeout_ms = static_cast<int>(get_int(kv, "backend.timeout_ms", 30000));
    cfg.backend.max_retries = static_cast<int>(get_int(kv, "backend.max_retries", 3));
    cfg.backend.retry_backoff_ms =
        static_cast<int>(get_int(kv, "backend.retry_backoff_ms", 250));
    cfg.backend.concurrency = static_cast<int>(get_int(kv, "backend.concurrency", 8));
    cfg.backend.api_key_env = get_str(kv, "backend.api_key_env", "ECORANK_API_KEY");
    cfg.backend.mock_script_path = get_str(kv, "backend.mock_script", "");
    cfg.trace = get_bool(kv, "backend.trace", false);

    cfg.optimizer.max_trials = static_cast<int>(get_int(kv, "optimizer.max_trials", 50));
    cfg.optimizer.batch_size =
        static_cast<std::size_t>(get_int(kv, "optimizer.batch_size", 16));
    cfg.optimizer.error_threshold =
        static_cast<std::size_t>(get_int(kv, "optimizer.error_threshold", 10));
    cfg.optimizer.errors_per_trial =
        static_cast<std::size_t>(get_int(kv, "optimizer.errors_per_trial", 2));
    cfg.optimizer.n_variants = static_cast<std::size_t>(get_int(kv, "optimizer.n_variants", 3));
    cfg.optimizer.pool_max = static_cast<std::size_t>(get_int(kv, "optimizer.pool_max", 12));
    cfg.optimizer.min_pulls_for_best = get_int(kv, "optimizer.min_pulls_for_best", 3);
    cfg.optimizer.reward_mode =
        reward_mode_from_string(get_str(kv, "optimizer.reward_mode", "ndcg_full"));
    cfg.optimizer.explore_c = get_double(kv, "optimizer.explore_c", 1.4142135623730950488);
    cfg.optimizer.seed = cfg.seed;
    cfg.seed_prompt_path = get_str(kv, "optimizer.seed_prompt", "");

    cfg.cutoffs = get_int_array(kv, "metrics.cutoffs", {1, 5});
    std::sort(cfg.cutoffs.begin(), cfg.cutoffs.end());

    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream out;
    out << "[paths]\n";
    out << "catalog = \"" << catalog_path << "\"\n";
    out << "sessions_train = \"" << sessions_train_path << "\"\n";
    out << "sessions_valid = \"" << sessions_valid_path << "\"\n";
    out << "sessions_test = \"" << sessions_test_path << "\"\n";
    out << "run_dir = \"" << run_dir << "\"\n";
    out << "\n[ingest]\n";
    out << "n_initial = " << n_initial << "\n";
    out << "seed = " << seed << "\n";
    out << "\n[reranker]\n";
    out << "k_filter = " << k_filter << "\n";
    out << "scorer = \"" << to_string(scorer) << "\"\n";
    out << "remote_endpoint = \"" << remote_endpoint << "\"\n";
    out << "\n[backend]\n";
    out << "kind = \"" << to_string(backend.kind) << "\"\n";
    out << "endpoint = \"" << backend.endpoint << "\"\n";
    out << "model = \"" << backend.model << "\"\n";
    out << "timeout_ms = " << backend.timeout_ms << "\n";
    out << "max_retries = " << backend.max_retries << "\n";
    out << "retry_backoff_ms = " << backend.retry_backoff_ms << "\n";
    out << "concurrency = " << backend.concurrency << "\n";
    out << "api_key_env = \"" << backend.api_key_env << "\"\n";
    out << "mock_script = \"" << backend.mock_script_path << "\"\n";
    out << "trace = " << (trace ? "true" : "false") << "\n";
    out << "\n[optimizer]\n";
    out << "max_trials = " << optimizer.max_trials << "\n";
    out << "batch_size = " << optimizer.batch_size << "\n";
    out << "error_threshold = " << optimizer.error_threshold << "\n";
    out << "errors_per_trial = " << optimizer.errors_per_trial << "\n";
    out << "n_variants = " << optimizer.n_variants << "\n";
    out << "pool_max = " << optimizer.pool_max << "\n";
    out << "min_pulls_for_best = " << optimizer.min_pulls_for_best << "\n";
    out << "reward_mode = \"" << to_string(optimizer.reward_mode) << "\"\n";
    out << "explore_c = " << format_double(optimizer.explore_c) << "\n";
    out << "seed_prompt = \"" << seed_prompt_path << "\"\n";
    out << "\n[metrics]\n";
    out << "cutoffs = [";
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
        if (i) out << ", ";
        out << cutoffs[i];
    }
    out << "]\n";
    return out.str();
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(Rng::fnv1a64(serialize())));
    return buf;
}

void RunConfig::validate() const {
    if (n_initial < 1) throw ConfigError("n_initial must be >= 1");
    if (k_filter < 1) throw ConfigError("k_filter must be >= 1");
    if (n_initial <= k_filter) throw ConfigError("n_initial must exceed k_filter");
    if (cutoffs.empty()) throw ConfigError("metrics.cutoffs must be non-empty");
    const std::size_t max_cutoff = *std::max_element(cutoffs.begin(), cutoffs.end());
    if (max_cutoff < 1) throw ConfigError("cutoffs must be >= 1");
    if (k_filter < max_cutoff)
        throw ConfigError("k_filter must be >= the largest metrics cutoff");
    if (scorer == ScorerKind::Remote && remote_endpoint.empty())
        throw ConfigError("remote scorer needs reranker.remote_endpoint");
    if (backend.kind == BackendKind::Http && backend.endpoint.empty())
        throw ConfigError("http backend needs backend.endpoint");
    if (backend.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (optimizer.max_trials < 1) throw ConfigError("max_trials must be >= 1");
    if (optimizer.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (optimizer.pool_max < 2) throw ConfigError("pool_max must be >= 2");
    if (optimizer.n_variants < 3 || optimizer.n_variants > 5)
        throw ConfigError("n_variants must be in [3, 5]");
}

std::string RunConfig::resolved_run_dir() const {
    if (!run_dir.empty()) return run_dir;
    return "runs/" + hash();
}

}  // namespace ecorank
