#include "nidsllm/llm_backend.hpp"

#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "json_io.hpp"
#include "nidsllm/digest.hpp"
#include "nidsllm/errors.hpp"

namespace nidsllm {

using json = nlohmann::json;

namespace {

class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<>& sem_;
};

std::string last_user_message(const ChatRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it)
        if (it->role == Role::user) return it->content;
    return {};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

void ChatRequest::validate() const {
    if (messages.empty()) throw ArgumentError("chat request has no messages");
    for (const auto& m : messages)
        if (m.content.empty()) throw ArgumentError("chat request contains an empty message");
    if (!(temperature >= 0.0 && temperature <= 1.0))
        throw ArgumentError("temperature must lie in [0, 1]");
    if (max_tokens <= 0) throw ArgumentError("max_tokens must be positive");
}

std::string_view backend_kind_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::http: return "http";
        case BackendKind::mock: return "mock";
        case BackendKind::replay: return "replay";
    }
    return "mock";
}

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "http") return BackendKind::http;
    if (name == "mock") return BackendKind::mock;
    if (name == "replay") return BackendKind::replay;
    throw ConfigError("unknown backend kind '" + std::string(name) + "'");
}

void BackendConfig::validate() const {
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
    switch (kind) {
        case BackendKind::http:
            if (endpoint_url.empty()) throw ConfigError("http backend needs endpoint_url");
            if (retry_limit < 0) throw ConfigError("retry_limit must be non-negative");
            if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
            break;
        case BackendKind::mock:
            if (mock_rule.empty()) throw ConfigError("mock backend needs mock_rule");
            if (injected_delay.count() < 0) throw ConfigError("injected_delay must be >= 0");
            break;
        case BackendKind::replay:
            if (transcript_path.empty()) throw ConfigError("replay backend needs transcript_path");
            break;
    }
}

std::string canonical_request_json(const ChatRequest& request) {
    // nlohmann::json objects are std::map backed, so keys serialize sorted.
    return detail::request_to_json(request, false).dump();
}

std::string request_digest(const ChatRequest& request) {
    return sha256_hex(canonical_request_json(request));
}

ChatBackend::ChatBackend(int max_in_flight)
    : max_in_flight_(max_in_flight < 1 ? 1 : max_in_flight), slots_(max_in_flight_) {}

ChatResponse ChatBackend::complete(const ChatRequest& request) {
    request.validate();
    SlotGuard guard(slots_);
    return do_complete(request);
}

MockBackend::MockBackend(std::string rule, std::chrono::microseconds injected_delay,
                         int max_in_flight)
    : ChatBackend(max_in_flight), rule_(std::move(rule)), delay_(injected_delay) {
    if (rule_ == "label-echo") {
        mode_ = Mode::label_echo;
    } else if (rule_ == "label-invert") {
        mode_ = Mode::label_invert;
    } else if (rule_ == "hash-random") {
        mode_ = Mode::hash_random;
    } else if (rule_.starts_with("always ") || rule_.starts_with("always:")) {
        constant_ = rule_.substr(7);
    } else if (rule_.starts_with("file:")) {
        constant_ = read_file(rule_.substr(5));
    } else {
        throw ConfigError("unknown mock rule '" + rule_ + "'");
    }
}

ChatResponse MockBackend::do_complete(const ChatRequest& request) {
    const auto start = std::chrono::steady_clock::now();
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    ChatResponse response;
    response.backend_id = id();
    switch (mode_) {
        case Mode::constant:
            response.content = constant_;
            break;
        case Mode::label_echo:
        case Mode::label_invert: {
            auto it = answer_key_.find(last_user_message(request));
            if (it == answer_key_.end())
                throw ArgumentError("mock rule '" + rule_ + "': request not in the answer key");
            const int label = mode_ == Mode::label_echo ? it->second : 1 - it->second;
            response.content = std::to_string(label);
            break;
        }
        case Mode::hash_random: {
            const auto digest = request_digest(request);
            const int nibble = std::stoi(digest.substr(0, 1), nullptr, 16);
            response.content = (nibble & 1) ? "1" : "0";
            break;
        }
    }
    response.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    return response;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& transcript, int max_in_flight)
    : ChatBackend(max_in_flight), source_(transcript.filename().string()) {
    for (auto& ex : read_transcript(transcript)) {
        const auto digest = request_digest(ex.request);
        // First recording wins for repeated digests.
        responses_.try_emplace(digest, Recorded{std::move(ex.response.content),
                                                std::move(ex.response.backend_id),
                                                ex.response.attempt_count, ex.response.latency});
    }
}

ChatResponse ReplayBackend::do_complete(const ChatRequest& request) {
    const auto digest = request_digest(request);
    auto it = responses_.find(digest);
    if (it == responses_.end()) throw ReplayMissError(digest);
    ChatResponse response;
    response.content = it->second.content;
    response.latency = it->second.latency;
    response.backend_id = id();
    response.attempt_count = it->second.attempt_count;
    return response;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw IoError("cannot open transcript " + path.string() + " for appending");
}

void TranscriptWriter::append(const ChatRequest& request, const ChatResponse& response) {
    const auto line = detail::exchange_to_json(request, response).dump();
    std::lock_guard lock(mutex_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing transcript " + path_.string());
    ++lines_;
}

std::size_t TranscriptWriter::lines_written() const {
    std::lock_guard lock(mutex_);
    return lines_;
}

RecordingBackend::RecordingBackend(ChatBackend& inner, TranscriptWriter& writer)
    : ChatBackend(inner.max_in_flight()), inner_(inner), writer_(writer) {}

ChatResponse RecordingBackend::do_complete(const ChatRequest& request) {
    auto response = inner_.complete(request);
    writer_.append(request, response);
    return response;
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
    config.validate();
    switch (config.kind) {
        case BackendKind::http: return std::make_unique<HttpBackend>(config);
        case BackendKind::mock:
            return std::make_unique<MockBackend>(config.mock_rule, config.injected_delay,
                                                 config.max_in_flight);
        case BackendKind::replay:
            return std::make_unique<ReplayBackend>(config.transcript_path, config.max_in_flight);
    }
    throw ConfigError("unsupported backend kind");
}

ChatResponse complete(const BackendConfig& config, const ChatRequest& request) {
    return make_backend(config)->complete(request);
}

void record_transcript(const std::filesystem::path& path, std::span<const Exchange> exchanges) {
    TranscriptWriter writer(path);
    for (const auto& ex : exchanges) writer.append(ex.request, ex.response);
}

std::vector<Exchange> read_transcript(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read transcript " + path.string());
    std::vector<Exchange> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(detail::exchange_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<ChatResponse> complete_all(ChatBackend& backend, std::span<const ChatRequest> requests,
                                       int workers) {
    std::vector<ChatResponse> out(requests.size());
    if (workers <= 1 || requests.size() <= 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) out[i] = backend.complete(requests[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            if (failed.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                out[i] = backend.complete(requests[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
                return;
            }
        }
    };
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), requests.size());
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
    return out;
}

ChatRequest classification_request(const FlowRecord& record, const PromptTemplate& tmpl,
                                   const std::string& model_id) {
    ChatRequest request;
    request.model_id = model_id;
    request.messages = build_classification_prompt(tmpl, encode_flow(record));
    request.temperature = kDefaultTemperature;
    request.max_tokens = kClassificationMaxTokens;
    request.request_tag = "row-" + std::to_string(record.source_row());
    return request;
}

Classification classify_flow(ChatBackend& backend, const FlowRecord& record,
                             const PromptTemplate& tmpl, const std::string& model_id) {
    auto response = backend.complete(classification_request(record, tmpl, model_id));
    auto verdict = parse_binary_verdict(response.content);
    return {std::move(verdict), std::move(response)};
}

Classification classify_flow(const BackendConfig& config, const FlowRecord& record,
                             const PromptTemplate& tmpl, const std::string& model_id) {
    auto backend = make_backend(config);
    return classify_flow(*backend, record, tmpl, model_id);
}

std::vector<Classification> classify_table(ChatBackend& backend, const FlowTable& table,
                                           const PromptTemplate& tmpl,
                                           const std::string& model_id, int workers) {
    std::vector<ChatRequest> requests;
    requests.reserve(table.size());
    for (const auto& row : table) requests.push_back(classification_request(row, tmpl, model_id));
    auto responses = complete_all(backend, requests, workers);
    std::vector<Classification> out;
    out.reserve(responses.size());
    for (auto& r : responses) {
        auto verdict = parse_binary_verdict(r.content);
        out.push_back({std::move(verdict), std::move(r)});
    }
    return out;
}

AnswerKey make_answer_key(const FlowTable& table, const PromptTemplate& tmpl) {
    AnswerKey key;
    key.reserve(table.size());
    for (const auto& row : table) {
        auto messages = build_classification_prompt(tmpl, encode_flow(row));
        key.emplace(messages.back().content, row.label());
    }
    return key;
}

}  // namespace nidsllm
