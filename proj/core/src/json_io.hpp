#pragma once

#include "json.hpp"
#include "nidsllm/llm_backend.hpp"

namespace nidsllm::detail {

// Wire/transcript shape: {model, messages:[{role, content}], temperature, max_tokens}.
nlohmann::json request_to_json(const ChatRequest& request, bool include_tag);
ChatRequest request_from_json(const nlohmann::json& j);

nlohmann::json exchange_to_json(const ChatRequest& request, const ChatResponse& response);
Exchange exchange_from_json(const nlohmann::json& j);

}  // namespace nidsllm::detail
