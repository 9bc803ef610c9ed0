#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace attrkit {

struct HttpResult {
    int status = 0;
    std::string body;
};

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minimal POST-JSON transport. Injected everywhere network traffic can
/// happen so tests and replay runs can prove zero network activity.
class Transport {
public:
    virtual ~Transport() = default;
    /// Throws TransportError when no HTTP response was obtained at all.
    virtual HttpResult post_json(const std::string& url, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::shared_ptr<Transport> make_http_transport(int timeout_seconds = 60);

/// Splits a URL into client base ("http://host:port") and path ("/v1/chat").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace attrkit
