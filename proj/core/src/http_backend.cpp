#include <cstdlib>
#include <optional>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "json_io.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/llm_backend.hpp"

namespace nidsllm {

using json = nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;     // scheme://host[:port]
    std::string base_path;  // without trailing '/'
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint_url '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) ep.base_path = url.substr(path_start);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
    return ep;
}

bool is_transient_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 512;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config)
    : ChatBackend(config.max_in_flight), config_(std::move(config)) {
    config_.validate();
    split_endpoint(config_.endpoint_url);
}

ChatResponse HttpBackend::do_complete(const ChatRequest& request) {
    const auto ep = split_endpoint(config_.endpoint_url);
    const auto path = ep.base_path + "/chat/completions";
    const auto body = detail::request_to_json(request, false).dump();

    httplib::Headers headers;
    if (!config_.auth_token_env.empty()) {
        // Read at call time only; never stored or logged.
        if (const char* token = std::getenv(config_.auth_token_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout -
                                                                             seconds);
    std::optional<int> last_status;
    std::string last_body;
    std::string last_transport_error;
    const int attempts = config_.retry_limit + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(ep.origin);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());

        const auto start = std::chrono::steady_clock::now();
        auto result = client.Post(path, headers, body, "application/json");
        const auto latency = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::steady_clock::now() - start);

        if (!result) {
            last_status.reset();
            last_transport_error = httplib::to_string(result.error());
        } else if (result->status >= 200 && result->status < 300) {
            json parsed;
            try {
                parsed = json::parse(result->body);
                ChatResponse response;
                response.content =
                    parsed.at("choices").at(0).at("message").at("content").get<std::string>();
                response.latency = latency;
                response.backend_id = id();
                response.attempt_count = attempt;
                return response;
            } catch (const json::exception& e) {
                throw TransportError("malformed chat completion response: " +
                                     std::string(e.what()) + ": " + excerpt(result->body));
            }
        } else if (is_transient_status(result->status)) {
            last_status = result->status;
            last_body = result->body;
        } else {
            throw HttpStatusError(result->status, excerpt(result->body));
        }

        if (attempt < attempts)
            std::this_thread::sleep_for(config_.backoff_base * (1LL << (attempt - 1)));
    }
    if (last_status) throw HttpStatusError(*last_status, excerpt(last_body));
    throw TransportError("request to " + config_.endpoint_url + " failed after " +
                         std::to_string(attempts) + " attempts: " + last_transport_error);
}

}  // namespace nidsllm
