#include "attrkit/gateway.hpp"

#include "attrkit/util.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace attrkit;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("attrkit-gw-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct FailingTransport : Transport {
    std::atomic<int> calls{0};
    HttpResult post_json(const std::string&, const std::string&,
                         const std::vector<std::pair<std::string, std::string>>&) override {
        ++calls;
        throw TransportError("deliberately unreachable");
    }
};

struct CannedTransport : Transport {
    std::string content = "canned reply";
    int status = 200;
    std::atomic<int> calls{0};
    std::string last_body;
    HttpResult post_json(const std::string&, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>&) override {
        ++calls;
        last_body = body;
        json response = {{"choices", json::array({{{"message", {{"content", content}}}}})}};
        return HttpResult{status, status == 200 ? response.dump() : "boom"};
    }
};

ChatRequest simple_request(const std::string& text = "hi") {
    return ChatRequest{"m1", {{ChatRole::user, text}}, 0.0};
}

GatewayConfig test_config(const fs::path& cache_dir) {
    GatewayConfig config;
    config.endpoint = "http://example.invalid/v1/chat";
    config.model = "m1";
    config.cache_dir = cache_dir;
    config.max_retries = 3;
    config.backoff_base_ms = 1;
    config.backoff_cap_ms = 2;
    return config;
}

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("fingerprints are stable and sensitive to every field") {
    ChatRequest a = simple_request();
    ChatRequest b = simple_request();
    CHECK(a.fingerprint() == b.fingerprint());
    // Frozen oracle: sha256 of the canonical sorted-key serialization
    // {"messages":[{"content":"hi","role":"user"}],"model":"m1","temperature":0.0}
    CHECK(a.fingerprint() == "f7262ef1fd2e728d62502a7d25ce5837f12a4636c84bf29441e2d6ed192cb631");

    ChatRequest c = a;
    c.model_id = "m2";
    CHECK(c.fingerprint() != a.fingerprint());
    ChatRequest d = a;
    d.temperature = 0.5;
    CHECK(d.fingerprint() != a.fingerprint());
    ChatRequest e = a;
    e.messages[0].content = "hi!";
    CHECK(e.fingerprint() != a.fingerprint());
    ChatRequest f = a;
    f.messages[0].role = ChatRole::system;
    CHECK(f.fingerprint() != a.fingerprint());
}

TEST_CASE("record persists and replay returns byte-identical content") {
    fs::path cache_dir = fresh_dir("roundtrip");
    auto transport = std::make_shared<CannedTransport>();
    transport->content = "exact bytes \xC3\xA9 \"quoted\"";
    {
        Gateway recorder(test_config(cache_dir), GatewayMode::record, transport);
        ChatResponse response = recorder.complete(simple_request());
        CHECK(response.content == transport->content);
        CHECK_FALSE(response.cached);
    }
    Gateway replayer(test_config(cache_dir), GatewayMode::replay, nullptr);
    ChatResponse replayed = replayer.complete(simple_request());
    CHECK(replayed.content == transport->content);
    CHECK(replayed.cached);
    CHECK(replayer.network_calls() == 0);
}

TEST_CASE("replay cache miss is a distinct error naming the fingerprint") {
    fs::path cache_dir = fresh_dir("miss");
    Gateway gateway(test_config(cache_dir), GatewayMode::replay, nullptr);
    try {
        gateway.complete(simple_request("unseen"));
        FAIL("expected cache miss");
    } catch (const GatewayError& e) {
        CHECK(e.kind == GatewayErrorKind::cache_miss);
        CHECK(std::string(e.what()).find(simple_request("unseen").fingerprint()) !=
              std::string::npos);
    }
}

TEST_CASE("replay performs zero network operations") {
    fs::path cache_dir = fresh_dir("zeronet");
    auto poison = std::make_shared<FailingTransport>();
    {
        ResponseCache cache(cache_dir);
        cache.store(simple_request(), "stored");
    }
    Gateway gateway(test_config(cache_dir), GatewayMode::replay, poison);
    CHECK(gateway.complete(simple_request()).content == "stored");
    CHECK(poison->calls == 0);
}

TEST_CASE("persistent transport failure exhausts exactly max_retries attempts") {
    fs::path cache_dir = fresh_dir("retries");
    auto failing = std::make_shared<FailingTransport>();
    GatewayConfig config = test_config(cache_dir);
    config.max_retries = 4;
    Gateway gateway(config, GatewayMode::live, failing);
    CHECK_THROWS_AS(gateway.complete(simple_request()), GatewayError);
    CHECK(failing->calls == 4);
    try {
        gateway.complete(simple_request());
    } catch (const GatewayError& e) {
        CHECK(e.kind == GatewayErrorKind::transport);
    }
}

TEST_CASE("non-2xx preserves status and body; 4xx does not retry") {
    fs::path cache_dir = fresh_dir("http4xx");
    auto transport = std::make_shared<CannedTransport>();
    transport->status = 418;
    Gateway gateway(test_config(cache_dir), GatewayMode::live, transport);
    try {
        gateway.complete(simple_request());
        FAIL("expected http error");
    } catch (const GatewayError& e) {
        CHECK(e.kind == GatewayErrorKind::http_status);
        CHECK(e.status == 418);
        CHECK(e.body == "boom");
    }
    CHECK(transport->calls == 1);
}

TEST_CASE("a torn cache write is never readable as valid") {
    fs::path cache_dir = fresh_dir("torn");
    ResponseCache cache(cache_dir);
    ChatRequest request = simple_request();
    // Simulate a crash mid-write: a partial JSON document under the final name.
    fs::create_directories(cache_dir);
    std::ofstream(cache_dir / (request.fingerprint() + ".json")) << "{\"content\": \"trunc";
    CHECK_FALSE(cache.lookup(request.fingerprint()).has_value());
    // Entries whose fingerprint disagrees with the file name are invalid too.
    std::ofstream(cache_dir / (request.fingerprint() + ".json"))
        << json{{"fingerprint", "0000"}, {"content", "x"}}.dump();
    CHECK_FALSE(cache.lookup(request.fingerprint()).has_value());
}

TEST_CASE("request body carries the wire contract and honors the api key env") {
    fs::path cache_dir = fresh_dir("wire");
    auto transport = std::make_shared<CannedTransport>();
    GatewayConfig config = test_config(cache_dir);
    config.api_key_env = "ATTRKIT_TEST_KEY";
    setenv("ATTRKIT_TEST_KEY", "sekret", 1);
    Gateway gateway(config, GatewayMode::live, transport);
    ChatRequest request{"m9", {{ChatRole::system, "sys"}, {ChatRole::user, "usr"}}, 0.25};
    gateway.complete(request);
    json body = json::parse(transport->last_body);
    CHECK(body["model"] == "m9");
    CHECK(body["temperature"] == 0.25);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "usr");
    unsetenv("ATTRKIT_TEST_KEY");
}

TEST_CASE("live mode over a real local http server") {
    httplib::Server server;
    server.Post("/v1/chat", [](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        std::string echo = body["messages"][0]["content"].get<std::string>();
        json response = {{"choices", json::array({{{"message", {{"content", "echo:" + echo}}}}})}};
        res.set_content(response.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    fs::path cache_dir = fresh_dir("live");
    GatewayConfig config = test_config(cache_dir);
    config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    Gateway gateway(config, GatewayMode::live, make_http_transport(5));
    ChatResponse response = gateway.complete(simple_request("ping"));
    CHECK(response.content == "echo:ping");
    CHECK(response.latency_ms >= 0);
    CHECK(gateway.network_calls() == 1);

    server.stop();
    server_thread.join();
}

TEST_CASE("concurrent completions respect the in-flight cap") {
    fs::path cache_dir = fresh_dir("concurrency");
    struct SlowTransport : Transport {
        std::atomic<int> in_flight{0};
        std::atomic<int> max_seen{0};
        HttpResult post_json(const std::string&, const std::string&,
                             const std::vector<std::pair<std::string, std::string>>&) override {
            int now = ++in_flight;
            int seen = max_seen.load();
            while (now > seen && !max_seen.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --in_flight;
            json response = {{"choices", json::array({{{"message", {{"content", "ok"}}}}})}};
            return HttpResult{200, response.dump()};
        }
    };
    auto transport = std::make_shared<SlowTransport>();
    GatewayConfig config = test_config(cache_dir);
    config.max_in_flight = 2;
    Gateway gateway(config, GatewayMode::live, transport);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back(
            [&gateway, i] { gateway.complete(simple_request("msg" + std::to_string(i))); });
    }
    for (auto& t : threads) t.join();
    CHECK(transport->max_seen <= 2);
    CHECK(gateway.network_calls() == 8);
}

TEST_CASE("split_url") {
    auto [base, path] = split_url("http://host:8080/v1/chat");
    CHECK(base == "http://host:8080");
    CHECK(path == "/v1/chat");
    auto [base2, path2] = split_url("https://host");
    CHECK(base2 == "https://host");
    CHECK(path2 == "/");
    CHECK_THROWS_AS(split_url("host/path"), TransportError);
}

}  // TEST_SUITE
