#include "attrkit/net.hpp"

#include <httplib.h>

namespace attrkit {

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw TransportError("URL lacks a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

namespace {

class HttpTransport : public Transport {
public:
    explicit HttpTransport(int timeout_seconds) : timeout_seconds_(timeout_seconds) {}

    HttpResult post_json(const std::string& url, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers) override {
        auto [base, path] = split_url(url);
        httplib::Client client(base);
        client.set_connection_timeout(timeout_seconds_, 0);
        client.set_read_timeout(timeout_seconds_, 0);
        httplib::Headers hl;
        for (const auto& [k, v] : headers) hl.emplace(k, v);
        auto res = client.Post(path, hl, body, "application/json");
        if (!res) {
            throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
        }
        return HttpResult{res->status, res->body};
    }

private:
    int timeout_seconds_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(int timeout_seconds) {
    return std::make_shared<HttpTransport>(timeout_seconds);
}

}  // namespace attrkit
