#include "nidsllm/prompt_codec.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include "nidsllm/errors.hpp"

namespace nidsllm {

namespace {

constexpr std::string_view kPairSeparator = ", ";
constexpr std::string_view kKeySeparator = ": ";

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view trim_newlines(std::string_view s) {
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

struct SlotValues {
    std::string_view flow;
    std::optional<std::string_view> verdict;
};

// Single pass, so slot-like text inside the flow is never re-expanded.
std::string render(std::string_view text, const SlotValues& slots, std::string_view template_id) {
    std::string out;
    out.reserve(text.size() + slots.flow.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos)
            throw TemplateError("template '" + std::string(template_id) + "': unterminated slot");
        out.append(text.substr(pos, open - pos));
        const auto name = trim(text.substr(open + 2, close - open - 2));
        if (name == "flow") {
            out.append(slots.flow);
        } else if (name == "verdict") {
            if (!slots.verdict)
                throw TemplateError("template '" + std::string(template_id) +
                                    "': slot {{verdict}} is unbound for this prompt");
            out.append(*slots.verdict);
        } else {
            throw TemplateError("template '" + std::string(template_id) + "': unknown slot {{" +
                                std::string(name) + "}}");
        }
        pos = close + 2;
    }
    return out;
}

bool has_slot(std::string_view text, std::string_view name) {
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string_view::npos) {
        const auto close = text.find("}}", pos + 2);
        if (close == std::string_view::npos) return false;
        if (trim(text.substr(pos + 2, close - pos - 2)) == name) return true;
        pos = close + 2;
    }
    return false;
}

std::vector<ChatMessage> build(const PromptTemplate& tmpl, std::string_view flow_text,
                               std::optional<std::string_view> verdict) {
    if (flow_text.empty())
        throw TemplateError("template '" + tmpl.id + "': flow text is empty");
    if (!has_slot(tmpl.system_instruction, "flow") && !has_slot(tmpl.user_template, "flow"))
        throw TemplateError("template '" + tmpl.id + "' has no {{flow}} slot");
    const SlotValues slots{flow_text, verdict};
    std::vector<ChatMessage> messages;
    auto system = render(tmpl.system_instruction, slots, tmpl.id);
    if (!system.empty()) messages.push_back({Role::system, std::move(system)});
    auto user = render(tmpl.user_template, slots, tmpl.id);
    if (user.empty()) throw TemplateError("template '" + tmpl.id + "' renders an empty user message");
    messages.push_back({Role::user, std::move(user)});
    return messages;
}

}  // namespace

std::string encode_flow(const FlowRecord& record) {
    std::string out;
    const auto& names = record.schema().feature_names;
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < record.size(); ++i)
        bytes += names[i].size() + record.value(i).size() + 4;
    out.reserve(bytes);
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (i) out.append(kPairSeparator);
        out.append(names[i]);
        out.append(kKeySeparator);
        out.append(record.value(i));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> decode_flow_text(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find(kPairSeparator, pos);
        if (end == std::string_view::npos) end = text.size();
        const auto item = text.substr(pos, end - pos);
        const auto colon = item.find(kKeySeparator);
        if (colon == std::string_view::npos) {
            pairs.emplace_back(std::string(item), std::string());
        } else {
            pairs.emplace_back(std::string(item.substr(0, colon)),
                               std::string(item.substr(colon + kKeySeparator.size())));
        }
        if (end == text.size()) break;
        pos = end + kPairSeparator.size();
    }
    return pairs;
}

bool is_separator_safe(const FlowRecord& record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
        const auto v = record.value(i);
        if (v.find(kPairSeparator) != std::string_view::npos ||
            v.find(kKeySeparator) != std::string_view::npos)
            return false;
    }
    return true;
}

std::string_view role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role parse_role(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    throw ArgumentError("unknown chat role '" + std::string(name) + "'");
}

PromptTemplate PromptTemplate::parse(std::string_view text, std::string fallback_id) {
    PromptTemplate tmpl;
    tmpl.id = std::move(fallback_id);
    std::string* section = nullptr;
    bool seen_section = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto t = trim(line);
        if (t == "[system]") {
            section = &tmpl.system_instruction;
            seen_section = true;
            continue;
        }
        if (t == "[user]") {
            section = &tmpl.user_template;
            seen_section = true;
            continue;
        }
        if (!section) {
            if (t.starts_with("# id:")) tmpl.id = std::string(trim(t.substr(5)));
            else if (!t.empty() && !t.starts_with("#"))
                throw TemplateError("template text before the first [system]/[user] section");
            continue;
        }
        section->append(line);
        section->push_back('\n');
    }
    if (!seen_section) throw TemplateError("template has no [system] or [user] section");
    tmpl.system_instruction = std::string(trim_newlines(tmpl.system_instruction));
    tmpl.user_template = std::string(trim_newlines(tmpl.user_template));
    if (tmpl.id.empty()) throw TemplateError("template has no id");
    return tmpl;
}

const PromptTemplate& default_classification_template() {
    static const PromptTemplate tmpl{
        std::string(kClassifyTemplateId),
        "You are a network intrusion detection system. You will receive one network flow "
        "exported in the NetFlow v2 format, written as comma-separated \"FEATURE: value\" pairs "
        "(IPv4 addresses, layer-4 ports, the IANA layer-4 protocol number, the layer-7 "
        "application protocol id, byte and packet counters, TCP flags, durations in "
        "milliseconds, TTLs, packet-length histograms, retransmissions, ICMP, DNS and FTP "
        "fields).\n"
        "Decide whether the flow belongs to a network attack.\n"
        "Output either \"1\" or \"0\": answer \"1\" if the flow is malicious and \"0\" if the "
        "flow is benign. Reply with that single character only, without any other text.",
        "NetFlow: {{flow}}",
    };
    return tmpl;
}

const PromptTemplate& default_explanation_template() {
    static const PromptTemplate tmpl{
        std::string(kExplainTemplateId),
        "You are a network security analyst explaining the decisions of a network intrusion "
        "detection system to a network operator. You will receive one network flow exported in "
        "the NetFlow v2 format, written as comma-separated \"FEATURE: value\" pairs, together "
        "with the verdict the system produced for it.",
        "The following network flow was classified as {{verdict}}.\n"
        "NetFlow: {{flow}}\n"
        "Explain why this flow is {{verdict}}. Answer with a bulleted list, one item per "
        "relevant feature, each written as \"Feature: explanation\" and quoting the feature "
        "values you rely on.",
    };
    return tmpl;
}

PromptTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read template file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return PromptTemplate::parse(buffer.str(), path.stem().string());
}

PromptTemplate resolve_template(std::string_view id_or_path) {
    if (id_or_path == kClassifyTemplateId) return default_classification_template();
    if (id_or_path == kExplainTemplateId) return default_explanation_template();
    const std::filesystem::path path{std::string(id_or_path)};
    if (std::filesystem::exists(path)) return load_template(path);
    throw TemplateError("'" + std::string(id_or_path) +
                        "' is neither a shipped template id nor a template file");
}

std::vector<ChatMessage> build_classification_prompt(const PromptTemplate& tmpl,
                                                     std::string_view flow_text) {
    return build(tmpl, flow_text, std::nullopt);
}

std::vector<ChatMessage> build_explanation_prompt(const PromptTemplate& tmpl,
                                                  std::string_view flow_text,
                                                  const Verdict& verdict) {
    return build(tmpl, flow_text, verdict.value == 1 ? "malicious" : "benign");
}

VerdictResult parse_binary_verdict(std::string_view completion) {
    const auto stripped = trim(completion);
    if (stripped == "1") return Verdict{1, std::string(completion), false};
    if (stripped == "0") return Verdict{0, std::string(completion), false};
    if (!stripped.empty() && (stripped.front() == '0' || stripped.front() == '1')) {
        std::size_t digits = 0;
        for (char c : completion)
            if (std::isdigit(static_cast<unsigned char>(c))) ++digits;
        if (digits == 1) return Verdict{stripped.front() - '0', std::string(completion), true};
    }
    return ParseFailure{std::string(completion)};
}

std::string render_prompt_text(std::span<const ChatMessage> messages) {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out.append("\n\n");
        out.append(m.content);
    }
    return out;
}

}  // namespace nidsllm
