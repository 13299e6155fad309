#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"

namespace nidsllm {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr int kClassificationMaxTokens = 4;
inline constexpr int kExplanationMaxTokens = 1024;

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = kDefaultTemperature;
    int max_tokens = kClassificationMaxTokens;
    std::string request_tag;  // correlation id; not part of the digest

    void validate() const;
};

struct ChatResponse {
    std::string content;
    std::chrono::microseconds latency{0};
    std::string backend_id;
    int attempt_count = 1;
};

struct Exchange {
    ChatRequest request;
    ChatResponse response;
};

enum class BackendKind { http, mock, replay };
std::string_view backend_kind_name(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint_url;    // http: base URL, "/chat/completions" is appended
    std::string auth_token_env;  // http: environment variable holding the bearer token
    int retry_limit = 3;         // http: retries after the first attempt
    std::chrono::milliseconds timeout{60'000};
    std::chrono::milliseconds backoff_base{1'000};  // doubles per retry
    std::string mock_rule;                          // mock: see MockBackend
    std::filesystem::path transcript_path;          // replay
    std::chrono::microseconds injected_delay{0};    // mock
    int max_in_flight = 4;

    void validate() const;
};

// Canonical JSON of (model, messages, temperature, max_tokens) with sorted keys.
std::string canonical_request_json(const ChatRequest& request);
// Hex SHA-256 of canonical_request_json.
std::string request_digest(const ChatRequest& request);

// Chat-completion backend. complete() may be called concurrently; at most
// max_in_flight calls run at once.
class ChatBackend {
public:
    explicit ChatBackend(int max_in_flight);
    virtual ~ChatBackend() = default;
    ChatBackend(const ChatBackend&) = delete;
    ChatBackend& operator=(const ChatBackend&) = delete;

    ChatResponse complete(const ChatRequest& request);
    virtual std::string id() const = 0;
    int max_in_flight() const noexcept { return max_in_flight_; }

protected:
    virtual ChatResponse do_complete(const ChatRequest& request) = 0;

private:
    int max_in_flight_;
    std::counting_semaphore<> slots_;
};

// User-message content -> true label; consulted by the label-echo test rules.
using AnswerKey = std::unordered_map<std::string, int>;

// Scripted backend. Rules:
//   "always 0" / "always:0"   any constant reply (text after the separator)
//   "file:<path>"             the file's content, for explanation fixtures
//   "label-echo"              the true label from the answer key (test oracle)
//   "label-invert"            1 - true label
//   "hash-random"             "0"/"1" from the request digest
class MockBackend : public ChatBackend {
public:
    MockBackend(std::string rule, std::chrono::microseconds injected_delay, int max_in_flight = 4);

    void set_answer_key(AnswerKey key) { answer_key_ = std::move(key); }
    std::string id() const override { return "mock:" + rule_; }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    enum class Mode { constant, label_echo, label_invert, hash_random };
    std::string rule_;
    Mode mode_ = Mode::constant;
    std::string constant_;
    std::chrono::microseconds delay_;
    AnswerKey answer_key_;
};

// Answers from a JSON Lines transcript keyed by request digest.
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& transcript, int max_in_flight = 4);

    std::string id() const override { return "replay:" + source_; }
    std::size_t size() const noexcept { return responses_.size(); }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    struct Recorded {
        std::string content;
        std::string backend_id;
        int attempt_count;
        std::chrono::microseconds latency;
    };
    std::string source_;
    std::unordered_map<std::string, Recorded> responses_;
};

// POST {endpoint}/chat/completions in the OpenAI-compatible wire format.
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(BackendConfig config);

    std::string id() const override { return "http:" + config_.endpoint_url; }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    BackendConfig config_;
};

// Append-only transcript, one {digest, request, response, latency_us} per line.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::filesystem::path& path);

    void append(const ChatRequest& request, const ChatResponse& response);
    std::size_t lines_written() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::ofstream out_;
    std::size_t lines_ = 0;
};

// Forwards to another backend and writes every successful exchange.
class RecordingBackend : public ChatBackend {
public:
    RecordingBackend(ChatBackend& inner, TranscriptWriter& writer);

    std::string id() const override { return inner_.id(); }

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    TranscriptWriter& writer_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

// One-shot helper building a backend for a single request.
ChatResponse complete(const BackendConfig& config, const ChatRequest& request);

void record_transcript(const std::filesystem::path& path, std::span<const Exchange> exchanges);
std::vector<Exchange> read_transcript(const std::filesystem::path& path);

// Runs requests on `workers` threads; results are in request order.
std::vector<ChatResponse> complete_all(ChatBackend& backend, std::span<const ChatRequest> requests,
                                       int workers);

struct Classification {
    VerdictResult verdict;
    ChatResponse response;
};

ChatRequest classification_request(const FlowRecord& record, const PromptTemplate& tmpl,
                                   const std::string& model_id);

Classification classify_flow(ChatBackend& backend, const FlowRecord& record,
                             const PromptTemplate& tmpl, const std::string& model_id);
Classification classify_flow(const BackendConfig& config, const FlowRecord& record,
                             const PromptTemplate& tmpl, const std::string& model_id);

std::vector<Classification> classify_table(ChatBackend& backend, const FlowTable& table,
                                           const PromptTemplate& tmpl,
                                           const std::string& model_id, int workers = 1);

// Maps each row's rendered user message to its label, for the label-echo rules.
AnswerKey make_answer_key(const FlowTable& table, const PromptTemplate& tmpl);

}  // namespace nidsllm
