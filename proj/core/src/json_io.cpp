#include "json_io.hpp"

#include "nidsllm/errors.hpp"

namespace nidsllm::detail {

using json = nlohmann::json;

json request_to_json(const ChatRequest& request, bool include_tag) {
    json messages = json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
    json j = {{"model", request.model_id},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    if (include_tag && !request.request_tag.empty()) j["request_tag"] = request.request_tag;
    return j;
}

ChatRequest request_from_json(const json& j) {
    ChatRequest request;
    request.model_id = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages"))
        request.messages.push_back(
            {parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    request.temperature = j.at("temperature").get<double>();
    request.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("request_tag")) request.request_tag = j["request_tag"].get<std::string>();
    return request;
}

json exchange_to_json(const ChatRequest& request, const ChatResponse& response) {
    return {{"digest", request_digest(request)},
            {"request", request_to_json(request, true)},
            {"response",
             {{"content", response.content},
              {"backend_id", response.backend_id},
              {"attempt_count", response.attempt_count}}},
            {"latency_us", response.latency.count()}};
}

Exchange exchange_from_json(const json& j) {
    Exchange ex;
    ex.request = request_from_json(j.at("request"));
    const auto& r = j.at("response");
    ex.response.content = r.at("content").get<std::string>();
    ex.response.backend_id = r.value("backend_id", std::string());
    ex.response.attempt_count = r.value("attempt_count", 1);
    ex.response.latency = std::chrono::microseconds(j.value("latency_us", std::int64_t{0}));
    if (j.contains("digest") && j["digest"].get<std::string>() != request_digest(ex.request))
        throw DataError("recorded digest does not match its request");
    return ex;
}

}  // namespace nidsllm::detail
