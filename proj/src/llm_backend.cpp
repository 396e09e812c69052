#include "ecorank/llm_backend.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <semaphore>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/rng.hpp"

namespace ecorank {

using nlohmann::json;

std::string fingerprint(const ChatRequest& req) {
    std::string blob = req.tag;
    blob += '\x1f';
    if (req.system) blob += *req.system;
    blob += '\x1f';
    blob += req.user;
    const std::uint64_t h = Rng::fnv1a64(blob);
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void TraceWriter::record(const ChatRequest& req, const ChatResponse& res) {
    json line;
    line["tag"] = req.tag;
    line["fingerprint"] = fingerprint(req);
    line["latency_ms"] = res.latency_ms;
    line["prompt_tokens"] = res.prompt_tokens;
    line["completion_tokens"] = res.completion_tokens;
    line["retries"] = res.retries;
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    out << line.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

MockScript MockScript::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script: " + path);
    json parsed = json::parse(in, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw ConfigError("mock script is not a JSON object: " + path);

    MockScript script;
    if (parsed.contains("by_tag"))
        for (auto it = parsed["by_tag"].begin(); it != parsed["by_tag"].end(); ++it)
            script.by_tag[it.key()] = it.value().get<std::string>();
    if (parsed.contains("by_fingerprint"))
        for (auto it = parsed["by_fingerprint"].begin(); it != parsed["by_fingerprint"].end(); ++it)
            script.by_fingerprint[it.key()] = it.value().get<std::string>();
    script.quality_ranker = parsed.value("quality_ranker", false);
    if (parsed.contains("default")) script.default_text = parsed["default"].get<std::string>();
    return script;
}

namespace {

std::string tag_agent(const std::string& tag) {
    std::size_t bar = tag.find('|');
    return bar == std::string::npos ? tag : tag.substr(0, bar);
}

// Value of `key=` inside a structured tag, or empty.
std::string tag_field(const std::string& tag, const std::string& key) {
    const std::string needle = "|" + key + "=";
    std::size_t pos = tag.find(needle);
    if (pos == std::string::npos) return {};
    pos += needle.size();
    std::size_t end = tag.find('|', pos);
    return tag.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

// Reads the {{q=x}} quality marker; prompts without one rank at q=0.5.
double quality_of(const std::string& text) {
    const std::string marker = "{{q=";
    std::size_t pos = text.find(marker);
    if (pos == std::string::npos) return 0.5;
    std::size_t end = text.find("}}", pos);
    if (end == std::string::npos) return 0.5;
    try {
        return std::stod(text.substr(pos + marker.size(), end - pos - marker.size()));
    } catch (const std::exception&) {
        return 0.5;
    }
}

std::string quality_ranking(const ChatRequest& req) {
    const std::string session_id = tag_field(req.tag, "session");
    const long prompt_id = std::atol(tag_field(req.tag, "prompt").c_str());
    const long target = std::atol(tag_field(req.tag, "target").c_str());
    const long n = std::atol(tag_field(req.tag, "n").c_str());
    if (n <= 0) throw EmptyCompletion();

    Rng rng = Rng(Rng::fnv1a64(session_id)).derive(static_cast<std::uint64_t>(prompt_id));
    const double q = quality_of(req.user);

    std::vector<long> rest;
    rest.reserve(static_cast<std::size_t>(n));
    for (long i = 1; i <= n; ++i)
        if (i != target) rest.push_back(i);
    rng.shuffle(rest);

    std::vector<long> order;
    order.reserve(static_cast<std::size_t>(n));
    if (target < 1 || target > n) {
        order = rest;  // target absent: nothing to bias
    } else if (rng.next_double() < q) {
        order.push_back(target);
        order.insert(order.end(), rest.begin(), rest.end());
    } else {
        const std::size_t slot = 1 + static_cast<std::size_t>(rng.next_below(
                                         static_cast<std::uint64_t>(n - 1)));
        order = rest;
        order.insert(order.begin() + static_cast<std::ptrdiff_t>(slot), target);
    }

    std::string out = "[";
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(order[i]);
    }
    out += "]";
    return out;
}

}  // namespace

ChatResponse MockBackend::complete(const ChatRequest& req) {
    if (req.user.empty()) throw ConfigError("chat request has empty user message");

    std::string text;
    bool found = false;

    if (auto it = script_.by_fingerprint.find(fingerprint(req));
        it != script_.by_fingerprint.end()) {
        text = it->second;
        found = true;
    }
    if (!found) {
        if (auto it = script_.by_tag.find(req.tag); it != script_.by_tag.end()) {
            text = it->second;
            found = true;
        }
    }
    if (!found) {
        if (auto it = script_.by_tag.find(tag_agent(req.tag)); it != script_.by_tag.end()) {
            text = it->second;
            found = true;
        }
    }
    if (!found && script_.quality_ranker && tag_agent(req.tag) == "evaluate") {
        text = quality_ranking(req);
        found = true;
    }
    if (!found && script_.default_text) {
        text = *script_.default_text;
        found = true;
    }
    if (!found || text.empty()) throw EmptyCompletion();

    ChatResponse res;
    res.text = text;
    res.prompt_tokens = static_cast<std::int64_t>(req.user.size() / 4);
    res.completion_tokens = static_cast<std::int64_t>(text.size() / 4);
    res.latency_ms = 0;
    if (trace_) trace_->record(req, res);
    return res;
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

struct HttpBackend::Gate {
    explicit Gate(int slots) : sem(slots) {}
    std::counting_semaphore<4096> sem;
};

HttpBackend::HttpBackend(BackendConfig cfg, std::shared_ptr<TraceWriter> trace)
    : cfg_(std::move(cfg)), trace_(std::move(trace)) {
    if (cfg_.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
    gate_ = std::make_unique<Gate>(cfg_.concurrency > 0 ? cfg_.concurrency : 1);
}

HttpBackend::~HttpBackend() = default;

namespace {

struct SplitUrl {
    std::string base;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    std::size_t scheme = url.find("://");
    std::size_t path_start =
        scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ChatResponse HttpBackend::complete(const ChatRequest& req) {
    if (req.user.empty()) throw ConfigError("chat request has empty user message");

    gate_->sem.acquire();
    struct Release {
        std::counting_semaphore<4096>& sem;
        ~Release() { sem.release(); }
    } release{gate_->sem};

    json body;
    body["model"] = cfg_.model;
    body["messages"] = json::array();
    if (req.system) body["messages"].push_back({{"role", "system"}, {"content", *req.system}});
    body["messages"].push_back({{"role", "user"}, {"content", req.user}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    const std::string payload = body.dump();

    const SplitUrl url = split_url(cfg_.endpoint);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    const auto started = std::chrono::steady_clock::now();
    bool last_was_timeout = false;
    int last_status = 0;

    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg_.retry_backoff_ms * (1 << (attempt - 1))));

        httplib::Client client(url.base);
        client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

        httplib::Result res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_was_timeout = res.error() == httplib::Error::ConnectionTimeout ||
                               res.error() == httplib::Error::Read;
            last_status = 0;
            continue;  // transient transport failure
        }
        if (res->status >= 500) {
            last_was_timeout = false;
            last_status = res->status;
            continue;  // transient server failure
        }
        if (res->status != 200) throw BadStatus(res->status);

        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded())
            throw TransportError("response is not JSON: " + res->body.substr(0, 200));
        std::string content;
        if (parsed.contains("choices") && parsed["choices"].is_array() &&
            !parsed["choices"].empty()) {
            const json& choice = parsed["choices"][0];
            if (choice.contains("message") && choice["message"].contains("content") &&
                choice["message"]["content"].is_string())
                content = choice["message"]["content"].get<std::string>();
        }
        if (content.empty()) throw EmptyCompletion();

        ChatResponse out;
        out.text = std::move(content);
        if (parsed.contains("usage")) {
            out.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
            out.completion_tokens = parsed["usage"].value("completion_tokens", 0);
        }
        out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
        out.retries = attempt;
        if (trace_) trace_->record(req, out);
        return out;
    }

    if (last_status >= 500) throw BadStatus(last_status);
    if (last_was_timeout) throw Timeout(cfg_.endpoint);
    throw TransportError("no response from " + cfg_.endpoint);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    std::shared_ptr<TraceWriter> trace;
    if (!cfg.trace_path.empty()) trace = std::make_shared<TraceWriter>(cfg.trace_path);
    if (cfg.kind == BackendKind::Http) return std::make_unique<HttpBackend>(cfg, trace);
    MockScript script;
    if (!cfg.mock_script_path.empty()) script = MockScript::load(cfg.mock_script_path);
    return std::make_unique<MockBackend>(std::move(script), trace);
}

}  // namespace ecorank
