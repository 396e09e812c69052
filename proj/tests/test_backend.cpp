#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/llm_backend.hpp"
#include "ecorank/scorer.hpp"
#include "support/fixtures.hpp"

using namespace ecorank;
using namespace ecorank::test;
using nlohmann::json;

namespace {

ChatRequest make_request(const std::string& tag, const std::string& user = "hello") {
    ChatRequest req;
    req.user = user;
    req.tag = tag;
    return req;
}

// Local chat-completions stub; handler decides status/body per call.
class StubServer {
public:
    template <typename Handler>
    explicit StubServer(Handler handler) {
        server_.Post("/v1/chat/completions", handler);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

BackendConfig http_config(const std::string& endpoint) {
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint = endpoint;
    cfg.max_retries = 3;
    cfg.retry_backoff_ms = 1;
    cfg.timeout_ms = 2000;
    return cfg;
}

}  // namespace

TEST_CASE("mock resolves tag scripts, exact tag first") {
    MockScript script;
    script.by_tag["evaluate"] = "[1, 2]";
    script.by_tag["evaluate|session=s1|prompt=2|target=1|n=2"] = "[2, 1]";
    MockBackend backend(script);

    CHECK(backend.complete(make_request("evaluate|session=s1|prompt=2|target=1|n=2")).text ==
          "[2, 1]");
    CHECK(backend.complete(make_request("evaluate|session=s9|prompt=4|target=2|n=2")).text ==
          "[1, 2]");
    CHECK_THROWS_AS(backend.complete(make_request("augment|prompt=1")), EmptyCompletion);
}

TEST_CASE("mock fingerprint table beats tag table") {
    const ChatRequest req = make_request("evaluate", "specific body");
    MockScript script;
    script.by_tag["evaluate"] = "tag";
    script.by_fingerprint[fingerprint(req)] = "pinned";
    MockBackend backend(script);
    CHECK(backend.complete(req).text == "pinned");
    CHECK(backend.complete(make_request("evaluate", "other body")).text == "tag");
}

TEST_CASE("mock default text and determinism") {
    MockScript script;
    script.default_text = "fallback";
    MockBackend backend(script);
    const ChatRequest req = make_request("anything");
    CHECK(backend.complete(req).text == "fallback");
    CHECK(backend.complete(req).text == backend.complete(req).text);
}

TEST_CASE("quality ranker puts the target first at q=1 and never at q=0") {
    MockScript script;
    script.quality_ranker = true;
    MockBackend backend(script);

    for (int s = 0; s < 50; ++s) {
        ChatRequest req = make_request("evaluate|session=q" + std::to_string(s) +
                                           "|prompt=3|target=7|n=20",
                                       "rank these {{q=1.0}}");
        const json order = json::parse(backend.complete(req).text);
        REQUIRE(order.is_array());
        REQUIRE(order.size() == 20);
        CHECK(order[0].get<int>() == 7);
        std::set<int> seen;
        for (const json& v : order) seen.insert(v.get<int>());
        CHECK(seen.size() == 20);  // a full permutation of 1..20
    }

    double rank_sum = 0.0;
    for (int s = 0; s < 400; ++s) {
        ChatRequest req = make_request("evaluate|session=z" + std::to_string(s) +
                                           "|prompt=3|target=7|n=20",
                                       "rank these {{q=0.0}}");
        const json order = json::parse(backend.complete(req).text);
        CHECK(order[0].get<int>() != 7);
        for (std::size_t i = 0; i < order.size(); ++i)
            if (order[i].get<int>() == 7) rank_sum += static_cast<double>(i + 1);
    }
    // uniform over ranks 2..20 has mean 11
    CHECK(rank_sum / 400.0 == doctest::Approx(11.0).epsilon(0.08));
}

TEST_CASE("quality ranker is deterministic per (session, prompt)") {
    MockScript script;
    script.quality_ranker = true;
    MockBackend backend(script);
    const ChatRequest req =
        make_request("evaluate|session=s1|prompt=5|target=3|n=10", "{{q=0.4}}");
    CHECK(backend.complete(req).text == backend.complete(req).text);

    const ChatRequest other =
        make_request("evaluate|session=s1|prompt=6|target=3|n=10", "{{q=0.4}}");
    CHECK(backend.complete(req).text != backend.complete(other).text);
}

TEST_CASE("http backend speaks the chat-completions wire format") {
    setenv("ECORANK_API_KEY", "sekret", 1);
    std::string seen_body, seen_auth;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"content":"canned reply"}}],)"
                        R"("usage":{"prompt_tokens":11,"completion_tokens":3}})",
                        "application/json");
    });

    HttpBackend backend(http_config(server.endpoint()));
    ChatRequest req = make_request("evaluate", "rank it");
    req.system = "be brief";
    req.temperature = 0.2;
    req.max_tokens = 64;

    const ChatResponse res = backend.complete(req);
    CHECK(res.text == "canned reply");
    CHECK(res.prompt_tokens == 11);
    CHECK(res.completion_tokens == 3);
    CHECK(res.retries == 0);
    CHECK(seen_auth == "Bearer sekret");

    const json body = json::parse(seen_body);
    CHECK(body["model"] == "meta-llama-3");
    CHECK(body["temperature"] == 0.2);
    CHECK(body["max_tokens"] == 64);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "rank it");
    unsetenv("ECORANK_API_KEY");
}

TEST_CASE("http backend retries transient 5xx then succeeds") {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const int call = ++calls;
        if (call <= 2) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });

    HttpBackend backend(http_config(server.endpoint()));
    const ChatResponse res = backend.complete(make_request("evaluate"));
    CHECK(res.text == "ok");
    CHECK(res.retries == 2);
    CHECK(calls.load() == 3);
}

TEST_CASE("http backend gives up after max_retries of 5xx") {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    HttpBackend backend(http_config(server.endpoint()));
    CHECK_THROWS_AS(backend.complete(make_request("evaluate")), BadStatus);
    CHECK(calls.load() == 4);  // initial attempt + 3 retries
}

TEST_CASE("client errors are not retried") {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 400;
    });
    HttpBackend backend(http_config(server.endpoint()));
    try {
        backend.complete(make_request("evaluate"));
        FAIL("expected BadStatus");
    } catch (const BadStatus& e) {
        CHECK(e.code == 400);
    }
    CHECK(calls.load() == 1);
}

TEST_CASE("empty completions surface as EmptyCompletion") {
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[{"message":{"content":""}}]})", "application/json");
    });
    HttpBackend backend(http_config(server.endpoint()));
    CHECK_THROWS_AS(backend.complete(make_request("evaluate")), EmptyCompletion);
}

TEST_CASE("connection failures map to transport errors") {
    BackendConfig cfg = http_config("http://127.0.0.1:1/v1/chat/completions");
    cfg.max_retries = 1;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete(make_request("evaluate")), TransportError);
}

TEST_CASE("trace records one line per completion") {
    TempDir dir("trace");
    const std::string trace_path = (dir.path() / "llm_trace.jsonl").string();
    auto trace = std::make_shared<TraceWriter>(trace_path);

    MockScript script;
    script.default_text = "x";
    MockBackend backend(script, trace);
    backend.complete(make_request("evaluate|session=s1|prompt=1|target=1|n=3"));
    backend.complete(make_request("augment|prompt=1"));

    const std::string content = read_file(trace_path);
    CHECK(content.find("\"tag\":\"evaluate|session=s1|prompt=1|target=1|n=3\"") !=
          std::string::npos);
    CHECK(content.find("\"tag\":\"augment|prompt=1\"") != std::string::npos);
    CHECK(std::count(content.begin(), content.end(), '\n') == 2);
}

TEST_CASE("remote scorer speaks the pairs/scores wire format") {
    httplib::Server server;
    std::string seen_body;
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        const json body = json::parse(req.body);
        json scores = json::array();
        for (std::size_t i = 0; i < body["pairs"].size(); ++i)
            scores.push_back(0.25 * static_cast<double>(i % 4));
        res.set_content(json{{"scores", scores}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteScorer scorer({"http://127.0.0.1:" + std::to_string(port) + "/score", 2000, 256});
    const std::vector<double> scores =
        scorer.score_pairs({{"a | X", "b | X"}, {"c | Y", "d | Y"}, {"e | Z", "f | Z"}});
    CHECK(scores == std::vector<double>{0.0, 0.25, 0.5});
    const json body = json::parse(seen_body);
    CHECK(body["pairs"][1] == json::array({"c | Y", "d | Y"}));

    server.stop();
    thread.join();
}

TEST_CASE("remote scorer failures become ScorerFailure") {
    httplib::Server server;
    int mode = 0;
    server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
        if (mode == 0) res.status = 500;
        if (mode == 1) res.set_content(R"({"scores":[0.5]})", "application/json");  // too few
        if (mode == 2) res.set_content(R"({"wrong":true})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteScorer scorer({"http://127.0.0.1:" + std::to_string(port) + "/score", 2000, 256});
    const std::vector<TextPair> pairs = {{"a", "b"}, {"c", "d"}};
    for (mode = 0; mode < 3; ++mode) {
        CAPTURE(mode);
        CHECK_THROWS_AS(scorer.score_pairs(pairs), ScorerFailure);
    }

    server.stop();
    thread.join();
}

TEST_CASE("mock script files load every section") {
    TempDir dir("script");
    write_file(dir.path() / "script.json",
               R"({"by_tag":{"refine_prompt":"<START>x<END>"},)"
               R"("by_fingerprint":{"abc":"y"},)"
               R"("quality_ranker":true,"default":"z"})");
    const MockScript script = MockScript::load((dir.path() / "script.json").string());
    CHECK(script.by_tag.at("refine_prompt") == "<START>x<END>");
    CHECK(script.by_fingerprint.at("abc") == "y");
    CHECK(script.quality_ranker);
    CHECK(script.default_text == "z");
}
