#pragma once

#include "attrkit/net.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrkit {

enum class ChatRole { system, user, assistant };

std::string_view to_string(ChatRole role);

struct ChatMessage {
    ChatRole role = ChatRole::user;
    std::string content;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;  // 0 for every pipeline call, for reproducibility

    /// Stable hex fingerprint of (model_id, messages, temperature): sha256
    /// over the canonical sorted-key JSON serialization of those fields.
    std::string fingerprint() const;
};

struct ChatResponse {
    std::string content;
    bool cached = false;
    int latency_ms = 0;
};

enum class GatewayMode { live, record, replay };

std::string_view to_string(GatewayMode mode);
std::optional<GatewayMode> gateway_mode_from_string(std::string_view s);

enum class GatewayErrorKind { cache_miss, transport, http_status, bad_response, config };

struct GatewayError : std::runtime_error {
    GatewayError(GatewayErrorKind kind_, std::string message, int status_ = 0, std::string body_ = {})
        : std::runtime_error(std::move(message)), kind(kind_), status(status_), body(std::move(body_)) {}
    GatewayErrorKind kind;
    int status;        // HTTP status for http_status errors
    std::string body;  // response body preserved for diagnostics
};

/// One JSON object per file, named by fingerprint hex, under a directory.
/// Writes go through temp-file + rename; a torn write is never readable as
/// a valid entry.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> lookup(const std::string& fingerprint) const;
    void store(const ChatRequest& request, const std::string& content) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct GatewayConfig {
    std::string endpoint;
    std::string model;
    std::string api_key_env = "LLM_API_KEY";
    int max_in_flight = 4;
    int max_retries = 3;  // total attempts on transport/5xx failures
    int backoff_base_ms = 250;
    int backoff_cap_ms = 4000;
    std::filesystem::path cache_dir = "cache";
    /// JSON pointer into the response body; remappable for non-default APIs.
    std::string response_content_pointer = "/choices/0/message/content";
};

/// Chat-completion client with three modes: live (HTTP call), record (call
/// and persist), replay (cache only, zero network). Safe for concurrent use;
/// in-flight live requests are capped by config.max_in_flight.
class Gateway {
public:
    Gateway(GatewayConfig config, GatewayMode mode, std::shared_ptr<Transport> transport = nullptr);

    ChatResponse complete(const ChatRequest& request);

    GatewayMode mode() const { return mode_; }
    const GatewayConfig& config() const { return config_; }
    uint64_t network_calls() const { return network_calls_.load(); }
    uint64_t completions() const { return completions_.load(); }

private:
    ChatResponse perform(const ChatRequest& request);

    GatewayConfig config_;
    GatewayMode mode_;
    std::shared_ptr<Transport> transport_;
    ResponseCache cache_;
    std::atomic<uint64_t> network_calls_{0};
    std::atomic<uint64_t> completions_{0};

    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    int free_slots_;
};

}  // namespace attrkit
