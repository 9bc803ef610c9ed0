#include "attrkit/gateway.hpp"

#include "attrkit/util.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace attrkit {

using nlohmann::json;

std::string_view to_string(ChatRole role) {
    switch (role) {
        case ChatRole::system: return "system";
        case ChatRole::user: return "user";
        case ChatRole::assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(GatewayMode mode) {
    switch (mode) {
        case GatewayMode::live: return "live";
        case GatewayMode::record: return "record";
        case GatewayMode::replay: return "replay";
    }
    return "replay";
}

std::optional<GatewayMode> gateway_mode_from_string(std::string_view s) {
    if (s == "live") return GatewayMode::live;
    if (s == "record") return GatewayMode::record;
    if (s == "replay") return GatewayMode::replay;
    return std::nullopt;
}

namespace {

json request_body(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    return json{{"model", request.model_id},
                {"messages", std::move(messages)},
                {"temperature", request.temperature}};
}

}  // namespace

std::string ChatRequest::fingerprint() const {
    return sha256_hex(request_body(*this).dump());
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<std::string> ResponseCache::lookup(const std::string& fingerprint) const {
    std::filesystem::path path = dir_ / (fingerprint + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    json entry = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
    if (entry.is_discarded() || !entry.is_object()) return std::nullopt;
    if (entry.value("fingerprint", "") != fingerprint) return std::nullopt;
    auto it = entry.find("content");
    if (it == entry.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

void ResponseCache::store(const ChatRequest& request, const std::string& content) const {
    std::filesystem::create_directories(dir_);
    json entry = request_body(request);
    entry["fingerprint"] = request.fingerprint();
    entry["content"] = content;
    write_text_file_atomic(dir_ / (request.fingerprint() + ".json"), entry.dump(2) + "\n");
}

Gateway::Gateway(GatewayConfig config, GatewayMode mode, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      mode_(mode),
      transport_(std::move(transport)),
      cache_(config_.cache_dir),
      free_slots_(std::max(1, config_.max_in_flight)) {}

ChatResponse Gateway::complete(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw GatewayError(GatewayErrorKind::config, "chat request has no messages");
    }
    completions_.fetch_add(1);
    const std::string fp = request.fingerprint();

    if (mode_ == GatewayMode::replay) {
        auto content = cache_.lookup(fp);
        if (!content) {
            throw GatewayError(GatewayErrorKind::cache_miss,
                               "replay cache miss for fingerprint " + fp + " under " +
                                   cache_.dir().string());
        }
        return ChatResponse{*content, /*cached=*/true, 0};
    }

    ChatResponse response = perform(request);
    if (mode_ == GatewayMode::record) {
        cache_.store(request, response.content);
    }
    return response;
}

ChatResponse Gateway::perform(const ChatRequest& request) {
    if (!transport_) {
        throw GatewayError(GatewayErrorKind::config,
                           "no transport configured for " + std::string(to_string(mode_)) + " mode");
    }
    if (config_.endpoint.empty()) {
        throw GatewayError(GatewayErrorKind::config, "llm.endpoint is not configured");
    }

    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
    }
    const std::string body = request_body(request).dump();

    // Cap concurrent in-flight network requests.
    {
        std::unique_lock lock(slots_mutex_);
        slots_cv_.wait(lock, [&] { return free_slots_ > 0; });
        --free_slots_;
    }
    struct SlotGuard {
        Gateway* gw;
        ~SlotGuard() {
            {
                std::lock_guard lock(gw->slots_mutex_);
                ++gw->free_slots_;
            }
            gw->slots_cv_.notify_one();
        }
    } guard{this};

    const int max_attempts = std::max(1, config_.max_retries);
    std::string last_error;
    int last_status = 0;
    std::string last_body;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            int64_t delay = static_cast<int64_t>(config_.backoff_base_ms) << (attempt - 2);
            delay = std::min<int64_t>(delay, config_.backoff_cap_ms);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        auto start = std::chrono::steady_clock::now();
        try {
            network_calls_.fetch_add(1);
            HttpResult res = transport_->post_json(config_.endpoint, body, headers);
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
            if (res.status >= 200 && res.status < 300) {
                json parsed = json::parse(res.body, nullptr, /*allow_exceptions=*/false);
                if (parsed.is_discarded()) {
                    throw GatewayError(GatewayErrorKind::bad_response,
                                       "response body is not JSON", res.status, res.body);
                }
                json::json_pointer ptr(config_.response_content_pointer);
                if (!parsed.contains(ptr) || !parsed.at(ptr).is_string()) {
                    throw GatewayError(GatewayErrorKind::bad_response,
                                       "response lacks content at " + config_.response_content_pointer,
                                       res.status, res.body);
                }
                return ChatResponse{parsed.at(ptr).get<std::string>(), false,
                                    static_cast<int>(elapsed)};
            }
            last_status = res.status;
            last_body = res.body;
            last_error = "HTTP " + std::to_string(res.status);
            // 429 and 5xx are retryable; other client errors are not.
            if (res.status != 429 && res.status < 500) break;
        } catch (const TransportError& e) {
            last_error = e.what();
            last_status = 0;
            last_body.clear();
        }
    }
    if (last_status > 0) {
        throw GatewayError(GatewayErrorKind::http_status, "chat endpoint returned " + last_error,
                           last_status, last_body);
    }
    throw GatewayError(GatewayErrorKind::transport,
                       "transport failed after " + std::to_string(max_attempts) +
                           " attempts: " + last_error);
}

}  // namespace attrkit
