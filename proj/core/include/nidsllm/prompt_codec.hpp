#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nidsllm/netflow_data.hpp"

namespace nidsllm {

// "NAME: value" pairs joined by ", ", in schema order, values byte-identical.
std::string encode_flow(const FlowRecord& record);

// Splits encoded text back into pairs. Only a left inverse when no value
// contains ", " or ": "; see is_separator_safe.
std::vector<std::pair<std::string, std::string>> decode_flow_text(std::string_view text);
bool is_separator_safe(const FlowRecord& record);

enum class Role { system, user, assistant };
std::string_view role_name(Role role);
Role parse_role(std::string_view name);

struct ChatMessage {
    Role role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

// Slots are written as {{flow}} and {{verdict}}. Template files use a
// `[system]` and a `[user]` section; an optional `# id: <name>` line names the
// template version recorded in reports.
struct PromptTemplate {
    std::string id;
    std::string system_instruction;
    std::string user_template;

    static PromptTemplate parse(std::string_view text, std::string fallback_id);
};

inline constexpr std::string_view kClassifyTemplateId = "nids-classify-v1";
inline constexpr std::string_view kExplainTemplateId = "nids-explain-v1";

const PromptTemplate& default_classification_template();
const PromptTemplate& default_explanation_template();
PromptTemplate load_template(const std::filesystem::path& path);

// Shipped id, or a template file path.
PromptTemplate resolve_template(std::string_view id_or_path);

std::vector<ChatMessage> build_classification_prompt(const PromptTemplate& tmpl,
                                                     std::string_view flow_text);

struct Verdict {
    int value = 0;
    std::string raw_completion;
    bool lenient = false;  // accepted by the relaxed tier, not an exact "0"/"1"
};

struct ParseFailure {
    std::string raw_completion;
};

using VerdictResult = std::variant<Verdict, ParseFailure>;

// Exact "0"/"1" after trimming whitespace; otherwise lenient when the first
// non-space character is the only digit in the completion and is 0 or 1.
VerdictResult parse_binary_verdict(std::string_view completion);

std::vector<ChatMessage> build_explanation_prompt(const PromptTemplate& tmpl,
                                                  std::string_view flow_text,
                                                  const Verdict& verdict);

// Flat text form of a conversation (system, blank line, user), used as the
// prompt field of fine-tuning corpora.
std::string render_prompt_text(std::span<const ChatMessage> messages);

}  // namespace nidsllm
