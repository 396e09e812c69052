#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace ecorank {

struct ChatRequest {
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.2;
    int max_tokens = 256;
    std::string tag;  // free-form label: "<agent>|key=value|..."
};

struct ChatResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    int retries = 0;
};

enum class BackendKind { Http, Mock };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint;  // OpenAI-compatible chat-completions URL (Http only)
    std::string model = "meta-llama-3";
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_backoff_ms = 250;
    int concurrency = 8;
    std::string api_key_env = "ECORANK_API_KEY";
    std::string trace_path;  // llm_trace.jsonl when non-empty
    std::string mock_script_path;
};

// Uniform LLM access point. complete() must tolerate concurrent callers.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

// Stable request identity used by trace logs and the mock's
// fingerprint-keyed script table. 16 hex chars.
std::string fingerprint(const ChatRequest& req);

// Scripted stand-in for the LLM. Responses resolve in this order:
//   1. by_fingerprint[fingerprint(request)]
//   2. by_tag[full tag], then by_tag[tag up to the first '|']
//   3. quality-biased ranker, when enabled and the tag is an evaluate tag
//   4. default_text
// and an EmptyCompletion error otherwise. Everything is deterministic:
// identical (script, request) pairs produce identical responses.
//
// The quality ranker reads a `{{q=x}}` marker from the request text and a
// structured tag `evaluate|session=S|prompt=P|target=T|n=N` (T = 1-based
// position of the target among the candidates, 0 when absent). It emits a
// JSON array ranking all N candidates where the target lands at rank 1
// with probability x (otherwise uniformly at ranks 2..N), on a stream
// seeded by (session id, prompt id).
struct MockScript {
    std::map<std::string, std::string> by_tag;
    std::map<std::string, std::string> by_fingerprint;
    bool quality_ranker = false;
    std::optional<std::string> default_text;

    static MockScript load(const std::string& path);
};

// Appends one JSON line per request: tag, fingerprint, latency, usage.
class TraceWriter {
public:
    explicit TraceWriter(std::string path) : path_(std::move(path)) {}
    void record(const ChatRequest& req, const ChatResponse& res);

private:
    std::mutex mutex_;
    std::string path_;
};

class MockBackend : public Backend {
public:
    explicit MockBackend(MockScript script, std::shared_ptr<TraceWriter> trace = nullptr)
        : script_(std::move(script)), trace_(std::move(trace)) {}

    ChatResponse complete(const ChatRequest& req) override;

private:
    MockScript script_;
    std::shared_ptr<TraceWriter> trace_;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig cfg, std::shared_ptr<TraceWriter> trace = nullptr);
    ~HttpBackend() override;

    ChatResponse complete(const ChatRequest& req) override;

private:
    struct Gate;
    BackendConfig cfg_;
    std::shared_ptr<TraceWriter> trace_;
    std::unique_ptr<Gate> gate_;  // bounds in-flight requests
};

// Builds the configured backend; loads the mock script file when set.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace ecorank
