// Claim extraction and fact-checking for model explanations.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <regex>

#include "nidsllm/explain.hpp"

namespace nidsllm {

namespace {

constexpr auto kIcase = std::regex::ECMAScript | std::regex::icase;

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::optional<double> as_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::uint32_t> as_integer_part(std::string_view s) {
    auto v = as_number(s);
    if (!v || *v < 0 || *v > 4294967295.0) return std::nullopt;
    return static_cast<std::uint32_t>(std::floor(*v));
}

std::vector<std::string> numbers_in(std::string_view s) {
    static const std::regex re(R"(\d+(?:\.\d+)*)");
    std::vector<std::string> out;
    const std::string str(s);
    for (std::sregex_iterator it(str.begin(), str.end(), re), end; it != end; ++it)
        out.push_back(it->str());
    return out;
}

// Case-insensitive whole-word search.
std::size_t find_word(std::string_view haystack_lower, std::string_view needle_lower,
                      std::size_t from = 0) {
    while (true) {
        const auto pos = haystack_lower.find(needle_lower, from);
        if (pos == std::string_view::npos) return pos;
        const auto end = pos + needle_lower.size();
        const bool left_ok = pos == 0 || !is_word_char(haystack_lower[pos - 1]);
        const bool right_ok = end >= haystack_lower.size() || !is_word_char(haystack_lower[end]);
        if (left_ok && right_ok) return pos;
        from = pos + 1;
    }
}

struct Sentence {
    std::size_t begin;
    std::size_t end;
};

bool is_list_marker(std::string_view s) {
    s = trim(s);
    if (s.empty()) return true;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ')' || c == '-' ||
               c == '*';
    });
}

std::vector<Sentence> split_sentences(std::string_view text) {
    std::vector<Sentence> out;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        std::size_t b = start;
        std::size_t e = end;
        while (b < e && (std::isspace(static_cast<unsigned char>(text[b])) || text[b] == '-' ||
                         text[b] == '*'))
            ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        if (b < e && !is_list_marker(text.substr(b, e - b))) out.push_back({b, e});
        start = end;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            flush(i);
            start = i + 1;
        } else if ((c == '.' || c == '!' || c == '?') &&
                   (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            // Keep "1." list markers attached to what follows.
            if (c == '.' && is_list_marker(text.substr(start, i + 1 - start))) continue;
            flush(i + 1);
        }
    }
    flush(text.size());
    return out;
}

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> words = {"the", "a", "an", "this", "that", "it",
                                                   "its", "is", "uses", "using", "via"};
    return words;
}

std::vector<std::string> words_of(std::string_view phrase) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < phrase.size()) {
        while (i < phrase.size() && std::isspace(static_cast<unsigned char>(phrase[i]))) ++i;
        const auto b = i;
        while (i < phrase.size() && !std::isspace(static_cast<unsigned char>(phrase[i]))) ++i;
        if (b < i) out.emplace_back(phrase.substr(b, i - b));
    }
    return out;
}

std::string join(const std::vector<std::string>& words, std::size_t b, std::size_t e) {
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        if (i > b) out += ' ';
        out += words[i];
    }
    return out;
}

bool known_protocol(const ProtocolRegistry& reg, std::string_view name) {
    const auto& names = reg.protocol_names();
    return std::any_of(names.begin(), names.end(),
                       [&](const std::string& n) { return same_protocol_name(n, name); });
}

// Narrows a captured phrase to a protocol name: leading stopwords go, then the
// longest known prefix (prefer_suffix=false) or suffix wins, else the first
// (or last) word.
std::string pick_name(std::string_view phrase, const ProtocolRegistry& reg, bool prefer_suffix) {
    auto words = words_of(phrase);
    while (!words.empty()) {
        const auto w = lower(words.front());
        if (std::find(stopwords().begin(), stopwords().end(), w) == stopwords().end()) break;
        words.erase(words.begin());
    }
    while (!words.empty() && !words.back().empty() &&
           std::ispunct(static_cast<unsigned char>(words.back().back())) &&
           words.back().back() != '+')
        words.back().pop_back();
    if (words.empty()) return {};
    const auto n = words.size();
    if (prefer_suffix) {
        for (std::size_t b = 0; b < n; ++b)
            if (known_protocol(reg, join(words, b, n))) return join(words, b, n);
        const auto last = lower(words.back());
        return last == "protocol" ? join(words, 0, n) : words.back();
    }
    for (std::size_t e = n; e > 0; --e)
        if (known_protocol(reg, join(words, 0, e))) return join(words, 0, e);
    return words.front();
}

struct FieldAlias {
    std::string alias;  // lower case
    std::string field;
};

std::vector<FieldAlias> field_aliases(const DatasetSchema& schema) {
    static const std::vector<std::pair<std::string, std::string>> extra = {
        {"FLOW_DURATION_MILLISECONDS", "flow duration"},
        {"FLOW_DURATION_MILLISECONDS", "duration"},
        {"IN_BYTES", "incoming bytes"},
        {"IN_BYTES", "inbound bytes"},
        {"OUT_BYTES", "outgoing bytes"},
        {"OUT_BYTES", "outbound bytes"},
        {"IN_PKTS", "incoming packets"},
        {"IN_PKTS", "inbound packets"},
        {"OUT_PKTS", "outgoing packets"},
        {"OUT_PKTS", "outbound packets"},
        {"TCP_FLAGS", "tcp flags"},
        {"MIN_TTL", "minimum ttl"},
        {"MAX_TTL", "maximum ttl"},
        {"LONGEST_FLOW_PKT", "longest packet"},
        {"SHORTEST_FLOW_PKT", "shortest packet"},
        {"MIN_IP_PKT_LEN", "minimum packet length"},
        {"MAX_IP_PKT_LEN", "maximum packet length"},
        {"PROTOCOL", "protocol number"},
        {"IPV4_SRC_ADDR", "source ip address"},
        {"IPV4_SRC_ADDR", "source address"},
        {"IPV4_SRC_ADDR", "source ip"},
        {"IPV4_DST_ADDR", "destination ip address"},
        {"IPV4_DST_ADDR", "destination address"},
        {"IPV4_DST_ADDR", "destination ip"},
        {"L7_PROTO", "layer 7 protocol"},
        {"L7_PROTO", "l7 protocol"},
    };
    std::vector<FieldAlias> out;
    for (const auto& f : schema.feature_names) {
        out.push_back({lower(f), f});
        auto spaced = lower(f);
        std::replace(spaced.begin(), spaced.end(), '_', ' ');
        if (spaced != lower(f)) out.push_back({spaced, f});
    }
    for (const auto& [field, alias] : extra)
        if (schema.index_of(field)) out.push_back({alias, field});
    std::stable_sort(out.begin(), out.end(), [](const FieldAlias& a, const FieldAlias& b) {
        return a.alias.size() > b.alias.size();
    });
    return out;
}

const std::vector<std::string>& location_words() {
    static const std::vector<std::string> words = {
        "United States", "United Kingdom", "South Korea", "North Korea", "Hong Kong",
        "New Zealand", "Netherlands", "Singapore", "Australia", "Australian", "American",
        "Japanese", "Chinese", "Russian", "Germany", "Ukraine", "Vietnam", "Taiwan", "Israel",
        "Brazil", "Canada", "Europe", "European", "France", "French", "German", "British",
        "Indian", "Iranian", "Korean", "Russia", "Sweden", "Spain", "Italy", "India", "Japan",
        "China", "Korea", "Iran", "Asia", "USA", "U.S.", "UK", "US"};
    return words;
}

std::string_view layer_field(Layer layer) { return layer == Layer::l7 ? "L7_PROTO" : "PROTOCOL"; }

std::string direction_field(std::string_view direction_lower) {
    if (direction_lower == "source" || direction_lower == "src") return "L4_SRC_PORT";
    if (direction_lower == "destination" || direction_lower == "dst") return "L4_DST_PORT";
    return {};
}

bool overlaps(const TextSpan& a, const TextSpan& b) { return a.begin < b.end && b.begin < a.end; }

class Extractor {
public:
    Extractor(std::string_view text, const DatasetSchema& schema, const ProtocolRegistry& registry)
        : text_(text), schema_(schema), registry_(registry), aliases_(field_aliases(schema)) {}

    std::vector<Claim> run() {
        std::vector<Claim> out;
        for (const auto& s : split_sentences(text_)) {
            auto claims = sentence_claims(s);
            std::stable_sort(claims.begin(), claims.end(), [](const Claim& a, const Claim& b) {
                return a.span.begin < b.span.begin;
            });
            for (auto& c : claims) out.push_back(std::move(c));
        }
        return out;
    }

private:
    Claim make(ClaimKind kind, std::size_t begin, std::size_t end) const {
        Claim c;
        c.kind = kind;
        c.span = {begin, end};
        c.excerpt = std::string(text_.substr(begin, end - begin));
        return c;
    }

    bool has_field(std::string_view f) const { return schema_.index_of(f).has_value(); }

    std::vector<Claim> sentence_claims(const Sentence& s) {
        const std::string sentence(text_.substr(s.begin, s.end - s.begin));
        const auto low = lower(sentence);
        std::vector<Claim> claims;
        const bool mentions_protocol = find_word(low, "protocol") != std::string::npos ||
                                       find_word(low, "protocols") != std::string::npos;
        const bool mentions_port = find_word(low, "port") != std::string::npos ||
                                   find_word(low, "ports") != std::string::npos;
        const Layer layer = sentence_layer(low);

        auto add = [&](Claim c) {
            for (const auto& existing : claims)
                if (overlaps(existing.span, c.span)) return;
            claims.push_back(std::move(c));
        };

        protocol_claims(sentence, s.begin, layer, mentions_protocol, mentions_port, add);
        port_claims(sentence, s.begin, add);
        field_claims(sentence, low, s.begin, add);
        location_claims(sentence, low, s.begin, add);
        if (claims.empty()) {
            if (auto r = range_claim(sentence, low, s)) claims.push_back(std::move(*r));
        }
        if (claims.empty()) {
            auto c = make(ClaimKind::other, s.begin, s.end);
            c.asserted = c.excerpt;
            c.numbers = numbers_in(c.excerpt);
            claims.push_back(std::move(c));
        }
        return claims;
    }

    static Layer sentence_layer(const std::string& low) {
        static const std::regex l7(R"(\blayer[ -]?7\b|\bl7\b|\bl7_proto\b|\bapplication\b)", kIcase);
        return std::regex_search(low, l7) ? Layer::l7 : Layer::l4;
    }

    template <typename Add>
    void protocol_claims(const std::string& sentence, std::size_t base, Layer layer,
                         bool mentions_protocol, bool mentions_port, Add&& add) {
        // "protocol 139 corresponds to NetBIOS"
        static const std::regex number_then_name(
            R"(\bprotocol\s+(?:number\s+|id\s+)?(\d{1,3})\s*,?\s*(?:is|was|corresponds\s+to|refers\s+to|represents|indicates|denotes|means|stands\s+for|=)\s+(?:the\s+|an?\s+)?([A-Za-z][A-Za-z0-9\-/+.]*(?:\s+[A-Za-z][A-Za-z0-9\-/+]*){0,3}))",
            kIcase);
        // "17 (UDP)"
        static const std::regex number_paren_name(
            R"(\b(\d{1,3})\s*\(\s*([A-Za-z][A-Za-z0-9\-/+ ]*?)\s*\))");
        // "UDP (17)", "Host Identity Protocol (139)"
        static const std::regex name_paren_number(
            R"(((?:[A-Z][A-Za-z0-9\-/+.]*\s+){0,3}[A-Z][A-Za-z0-9\-/+]*)\s*\((\d{1,3})\))");
        // "the protocol is TCP"
        static const std::regex protocol_is_name(
            R"(\bprotocol\s+(?:used\s+)?(?:is|was)\s+(?:the\s+)?([A-Za-z][A-Za-z0-9\-/+]*))",
            kIcase);

        auto emit = [&](std::size_t b, std::size_t e, std::optional<std::uint32_t> number,
                        std::string name) {
            if (name.empty()) return;
            auto c = make(ClaimKind::protocol_name, base + b, base + e);
            c.number = number;
            c.name = std::move(name);
            c.layer = layer;
            if (has_field(layer_field(layer))) c.subject_field = std::string(layer_field(layer));
            if (number) c.numbers = {std::to_string(*number)};
            c.asserted = (layer == Layer::l7 ? "L7 protocol " : "protocol ") +
                         (number ? std::to_string(*number) + " = " : std::string("= ")) + c.name;
            add(std::move(c));
        };
        auto number_of = [](const std::ssub_match& m) {
            return static_cast<std::uint32_t>(std::stoul(m.str()));
        };

        for (std::sregex_iterator it(sentence.begin(), sentence.end(), number_then_name), end;
             it != end; ++it) {
            const auto& m = *it;
            auto name = pick_name(m[2].str(), registry_, false);
            static const std::vector<std::string> not_names = {
                "used", "commonly", "typically", "usually", "often", "likely", "not",
                "associated", "a", "an", "the", "also", "being", "set", "0", "zero"};
            if (std::find(not_names.begin(), not_names.end(), lower(name)) != not_names.end())
                continue;
            emit(static_cast<std::size_t>(m.position(0)),
                 static_cast<std::size_t>(m.position(2) + m.length(2)), number_of(m[1]),
                 std::move(name));
        }
        if (mentions_protocol) {
            for (std::sregex_iterator it(sentence.begin(), sentence.end(), number_paren_name), end;
                 it != end; ++it) {
                const auto& m = *it;
                const auto pos = static_cast<std::size_t>(m.position(0));
                const auto before = lower(sentence.substr(0, pos));
                if (before.ends_with("port ") || before.ends_with("ports ")) continue;
                emit(pos, pos + static_cast<std::size_t>(m.length(0)), number_of(m[1]),
                     pick_name(m[2].str(), registry_, false));
            }
        }
        for (std::sregex_iterator it(sentence.begin(), sentence.end(), name_paren_number), end;
             it != end; ++it) {
            const auto& m = *it;
            auto name = pick_name(m[1].str(), registry_, true);
            if (!mentions_protocol && (mentions_port || !known_protocol(registry_, name))) continue;
            const auto prefix_len = m[1].str().find(name);
            const auto b = static_cast<std::size_t>(m.position(1)) +
                           (prefix_len == std::string::npos ? 0 : prefix_len);
            emit(b, static_cast<std::size_t>(m.position(0) + m.length(0)), number_of(m[2]),
                 std::move(name));
        }
        for (std::sregex_iterator it(sentence.begin(), sentence.end(), protocol_is_name), end;
             it != end; ++it) {
            const auto& m = *it;
            const auto name = m[1].str();
            if (!known_protocol(registry_, name)) continue;
            emit(static_cast<std::size_t>(m.position(0)),
                 static_cast<std::size_t>(m.position(0) + m.length(0)), std::nullopt, name);
        }
    }

    template <typename Add>
    void port_claims(const std::string& sentence, std::size_t base, Add&& add) {
        static const std::regex port_re(
            R"(\b(?:(source|src|destination|dst)\s+)?ports?(?:\s+numbers?)?\s*(?:(?:is|are|was|were|of|=|:)\s*|with\s+(?:the\s+|a\s+)?values?\s+(?:of\s+)?|set\s+to\s+|values?\s+)?(\d{1,5})\b)",
            kIcase);
        struct Hit {
            std::size_t begin, end;
            std::string direction;
            std::uint32_t port;
        };
        std::vector<Hit> hits;
        for (std::sregex_iterator it(sentence.begin(), sentence.end(), port_re), end; it != end;
             ++it) {
            const auto& m = *it;
            const auto value = std::stoul(m[2].str());
            if (value > 65535) continue;
            hits.push_back({static_cast<std::size_t>(m.position(0)),
                            static_cast<std::size_t>(m.position(0) + m.length(0)),
                            lower(m[1].str()), static_cast<std::uint32_t>(value)});
        }
        const auto low = lower(sentence);
        for (std::size_t h = 0; h < hits.size(); ++h) {
            const auto& hit = hits[h];
            // The service word must sit between this port mention and the next.
            const auto seg_begin = h == 0 ? std::size_t{0} : hits[h - 1].end;
            const auto seg_end = h + 1 < hits.size() ? hits[h + 1].begin : sentence.size();
            std::string service;
            std::size_t service_pos = std::string::npos;
            std::size_t best_distance = std::string::npos;
            for (const auto& name : registry_.service_names()) {
                const auto lname = lower(name);
                for (auto pos = find_word(low, lname, seg_begin);
                     pos != std::string::npos && pos + lname.size() <= seg_end;
                     pos = find_word(low, lname, pos + 1)) {
                    const auto distance = pos >= hit.end ? pos - hit.end
                                          : hit.begin >= pos + lname.size()
                                              ? hit.begin - pos - lname.size()
                                              : 0;
                    if (distance < best_distance) {
                        best_distance = distance;
                        service = sentence.substr(pos, lname.size());
                        service_pos = pos;
                    }
                }
            }
            auto b = hit.begin;
            auto e = hit.end;
            if (service_pos != std::string::npos) {
                b = std::min(b, service_pos);
                e = std::max(e, service_pos + service.size());
            }
            if (service.empty() && hit.direction.empty() && hit.port != 0) continue;
            auto c = make(ClaimKind::port_service, base + b, base + e);
            c.number = hit.port;
            c.name = service;
            c.numbers = {std::to_string(hit.port)};
            const auto field = direction_field(hit.direction);
            if (!field.empty() && has_field(field)) c.subject_field = field;
            c.asserted = (hit.direction.empty() ? std::string("port ") : hit.direction + " port ") +
                         std::to_string(hit.port) + (service.empty() ? "" : " = " + service);
            add(std::move(c));
        }
    }

    template <typename Add>
    void field_claims(const std::string& sentence, const std::string& low, std::size_t base,
                      Add&& add) {
        static const std::regex tail(
            R"(^\s*(?:value\s+|field\s+)?(?:is|was|equals|of|=|:)\s*(-?\d+(?:\.\d+)*))", kIcase);
        for (const auto& fa : aliases_) {
            for (auto pos = find_word(low, fa.alias); pos != std::string::npos;
                 pos = find_word(low, fa.alias, pos + 1)) {
                const auto after = pos + fa.alias.size();
                std::smatch m;
                const std::string rest = sentence.substr(after);
                if (!std::regex_search(rest, m, tail)) continue;
                const auto end = after + static_cast<std::size_t>(m.position(1) + m.length(1));
                auto c = make(ClaimKind::field_value, base + pos, base + end);
                c.subject_field = fa.field;
                c.value = m[1].str();
                c.numbers = {c.value};
                c.asserted = fa.field + " = " + c.value;
                add(std::move(c));
            }
        }
    }

    template <typename Add>
    void location_claims(const std::string& sentence, const std::string& low, std::size_t base,
                         Add&& add) {
        std::vector<TextSpan> taken;
        for (const auto& word : location_words()) {
            for (std::size_t from = 0;;) {
                auto pos = sentence.find(word, from);
                if (pos == std::string::npos) break;
                from = pos + 1;
                const auto end = pos + word.size();
                const bool left_ok = pos == 0 || !is_word_char(sentence[pos - 1]);
                const bool right_ok = end >= sentence.size() || !is_word_char(sentence[end]) ||
                                      word.back() == '.';
                if (!left_ok || !right_ok) continue;
                const TextSpan span{pos, end};
                if (std::any_of(taken.begin(), taken.end(),
                                [&](const TextSpan& t) { return overlaps(t, span); }))
                    continue;
                taken.push_back(span);

                // Side from the closest preceding "source"/"destination".
                const auto src = std::max(rfind_word(low, "source", pos), rfind_word(low, "src", pos));
                const auto dst = std::max(rfind_word(low, "destination", pos),
                                          rfind_word(low, "dst", pos));
                std::string field;
                std::size_t begin = pos;
                if (src != kNone || dst != kNone) {
                    const bool is_src = dst == kNone || (src != kNone && src > dst);
                    field = is_src ? "IPV4_SRC_ADDR" : "IPV4_DST_ADDR";
                    begin = is_src ? src : dst;
                    // Skip a side word that belongs to an earlier location.
                    if (std::any_of(taken.begin(), taken.end() - 1, [&](const TextSpan& t) {
                            return t.begin > begin && t.end <= pos;
                        })) {
                        field.clear();
                        begin = pos;
                    }
                }
                auto c = make(ClaimKind::location, base + begin, base + end);
                if (!field.empty() && has_field(field)) c.subject_field = field;
                c.name = word;
                c.numbers = numbers_in(c.excerpt);
                c.asserted = (field.empty() ? std::string("located in ")
                                            : field + " located in ") + word;
                add(std::move(c));
            }
        }
    }

    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    static std::size_t rfind_word(const std::string& low, std::string_view word, std::size_t before) {
        std::size_t found = kNone;
        for (auto pos = find_word(low, word); pos != std::string::npos && pos < before;
             pos = find_word(low, word, pos + 1))
            found = pos;
        return found;
    }

    std::optional<Claim> range_claim(const std::string& sentence, const std::string& low,
                                     const Sentence& s) {
        static const std::regex typical(
            R"(\b(typical|typically|normal|normally|small|smaller|large|larger|short|long|common|usual|unusual|high|higher|low|lower|brief|tiny|huge|consistent)\b)",
            kIcase);
        static const std::regex measure(
            R"(\b(size|sizes|length|lengths|byte|bytes|packet|packets|duration|ttl|window|throughput|retransmitted|retransmissions)\b)",
            kIcase);
        if (!std::regex_search(low, typical) || !std::regex_search(low, measure))
            return std::nullopt;
        auto c = make(ClaimKind::range_judgement, s.begin, s.end);
        c.numbers = numbers_in(sentence);
        c.asserted = c.excerpt;
        return c;
    }

    std::string_view text_;
    const DatasetSchema& schema_;
    const ProtocolRegistry& registry_;
    std::vector<FieldAlias> aliases_;
};

std::string entry_label(const ProtocolEntry& e) {
    std::string out = std::to_string(e.number) + " = " + e.name;
    if (!e.aliases.empty()) out += " (" + e.aliases.front() + ")";
    return out;
}

bool is_size_field(std::string_view f) {
    for (std::string_view key : {"BYTES", "PKT", "LEN", "DURATION", "TTL"})
        if (f.find(key) != std::string_view::npos) return true;
    return false;
}

bool same_value(std::string_view a, std::string_view b) {
    if (trim(a) == trim(b)) return true;
    auto x = as_number(a);
    auto y = as_number(b);
    return x && y && std::fabs(*x - *y) <= 1e-9 * std::max({1.0, std::fabs(*x), std::fabs(*y)});
}

FactCheckFinding check_protocol(const Claim& claim, const FlowRecord& record,
                                const ProtocolRegistry& reg) {
    FactCheckFinding f{claim, FindingStatus::unverifiable, {}, {}};
    const bool l7 = claim.layer == Layer::l7;
    const auto field = std::string(layer_field(claim.layer));
    const auto raw = record.find(field);
    const auto flow_number = raw ? as_integer_part(*raw) : std::nullopt;
    auto lookup = [&](std::uint32_t n) { return l7 ? reg.l7(n) : reg.l4(n); };
    const std::string table = l7 ? "L7 application id" : "IANA protocol";

    if (!claim.number) {
        if (!flow_number) {
            f.evidence = "flow has no " + field + " value to compare";
            return f;
        }
        const auto* entry = lookup(*flow_number);
        if (!entry) {
            f.evidence = field + " is " + std::string(*raw) + ", which the registry does not list";
            return f;
        }
        if (ProtocolRegistry::matches(*entry, claim.name)) {
            f.status = FindingStatus::supported;
            f.evidence = field + " is " + std::string(*raw) + "; " + table + " " + entry_label(*entry);
        } else {
            f.status = FindingStatus::contradicted_by_flow;
            f.evidence = field + " is " + std::string(*raw) + " (" + entry->name + "), not " +
                         claim.name;
        }
        return f;
    }

    const auto n = *claim.number;
    if (flow_number && *flow_number != n) {
        f.status = FindingStatus::contradicted_by_flow;
        f.evidence = field + " is " + std::string(*raw) + ", not " + std::to_string(n);
        return f;
    }
    const auto* entry = lookup(n);
    if (!entry) {
        f.evidence = "no " + table + " entry for " + std::to_string(n);
        return f;
    }
    if (ProtocolRegistry::matches(*entry, claim.name)) {
        f.status = FindingStatus::supported;
        f.evidence = table + " " + entry_label(*entry);
        return f;
    }
    f.status = FindingStatus::contradicted_by_registry;
    f.evidence = table + " " + entry_label(*entry) + ", not " + claim.name;
    if (!l7) {
        for (const auto* p : reg.ports(n)) {
            if (ProtocolRegistry::matches(*p, claim.name)) {
                f.notes.push_back("layer confusion: " + claim.name + " is the service on port " +
                                  std::to_string(n) + "/" + std::string(transport_name(p->transport)) +
                                  ", above Layer 4; " + field +
                                  " holds Layer-4 protocol numbers");
                break;
            }
        }
    }
    return f;
}

FactCheckFinding check_port(const Claim& claim, const FlowRecord& record,
                            const ProtocolRegistry& reg) {
    FactCheckFinding f{claim, FindingStatus::unverifiable, {}, {}};
    const auto port = claim.number.value_or(0);
    const auto port_text = std::to_string(port);

    std::string flow_evidence;
    if (!claim.subject_field.empty()) {
        if (auto v = record.find(claim.subject_field)) {
            if (!same_value(*v, port_text)) {
                f.status = FindingStatus::contradicted_by_flow;
                f.evidence = claim.subject_field + " is " + std::string(*v) + ", not " + port_text;
                return f;
            }
            flow_evidence = claim.subject_field + " is " + std::string(*v);
        }
    } else {
        const auto src = record.find("L4_SRC_PORT");
        const auto dst = record.find("L4_DST_PORT");
        if (src && dst) {
            if (!same_value(*src, port_text) && !same_value(*dst, port_text)) {
                f.status = FindingStatus::contradicted_by_flow;
                f.evidence = "neither L4_SRC_PORT (" + std::string(*src) + ") nor L4_DST_PORT (" +
                             std::string(*dst) + ") is " + port_text;
                return f;
            }
            flow_evidence = same_value(*dst, port_text) ? "L4_DST_PORT is " + std::string(*dst)
                                                        : "L4_SRC_PORT is " + std::string(*src);
        }
    }

    auto transport = Transport::any;
    if (auto p = record.find("PROTOCOL"))
        if (auto n = as_integer_part(*p)) transport = transport_of(*n);
    const auto entries = reg.ports(port, transport);

    if (port == 0) {
        std::string note = "unusual but legitimate";
        for (const auto* e : entries)
            if (!e->note.empty()) note = e->note;
        f.evidence = (flow_evidence.empty() ? "" : flow_evidence + "; ") + "port 0: " + note;
        f.notes.push_back("unusual but legitimate");
        return f;
    }
    if (claim.name.empty()) {
        if (!flow_evidence.empty()) {
            f.status = FindingStatus::supported;
            f.evidence = flow_evidence;
        } else {
            f.evidence = "flow has no port fields to compare";
        }
        return f;
    }
    if (entries.empty()) {
        f.evidence = "port " + port_text + " is not in the well-known port registry";
        return f;
    }
    std::string listed;
    for (const auto* e : entries) {
        if (ProtocolRegistry::matches(*e, claim.name)) {
            f.status = FindingStatus::supported;
            f.evidence = (flow_evidence.empty() ? "" : flow_evidence + "; ") + "registry " +
                         port_text + "/" + std::string(transport_name(e->transport)) + " = " +
                         e->service;
            return f;
        }
        if (!listed.empty()) listed += ", ";
        listed += port_text + "/" + std::string(transport_name(e->transport)) + " = " + e->service;
    }
    f.status = FindingStatus::contradicted_by_registry;
    f.evidence = "registry " + listed + ", not " + claim.name;
    return f;
}

FactCheckFinding check_field(const Claim& claim, const FlowRecord& record) {
    FactCheckFinding f{claim, FindingStatus::unverifiable, {}, {}};
    const auto v = record.find(claim.subject_field);
    if (!v) {
        f.evidence = "flow has no " + claim.subject_field + " field";
        return f;
    }
    if (same_value(*v, claim.value)) {
        f.status = FindingStatus::supported;
        f.evidence = claim.subject_field + " is " + std::string(*v);
    } else {
        f.status = FindingStatus::contradicted_by_flow;
        f.evidence = claim.subject_field + " is " + std::string(*v) + ", not " + claim.value;
    }
    return f;
}

FactCheckFinding check_range(const Claim& claim, const FlowRecord& record) {
    FactCheckFinding f{claim, FindingStatus::unverifiable, {}, {}};
    if (claim.numbers.empty()) {
        f.evidence = "qualitative judgement with no figures to compare";
        return f;
    }
    std::string matched;
    for (const auto& n : claim.numbers) {
        std::string hit;
        for (std::size_t i = 0; i < record.size(); ++i) {
            const auto field = record.field(i);
            if (is_size_field(field.name) && same_value(field.value, n)) {
                hit = std::string(field.name);
                break;
            }
        }
        if (hit.empty()) {
            f.evidence = n + " does not appear in any size or duration field; judgement not checked";
            return f;
        }
        if (!matched.empty()) matched += ", ";
        matched += hit + " = " + n;
    }
    f.status = FindingStatus::supported;
    f.evidence = matched;
    return f;
}

}  // namespace

std::string_view claim_kind_name(ClaimKind kind) {
    switch (kind) {
        case ClaimKind::protocol_name: return "protocol_name";
        case ClaimKind::port_service: return "port_service";
        case ClaimKind::field_value: return "field_value";
        case ClaimKind::location: return "location";
        case ClaimKind::range_judgement: return "range_judgement";
        case ClaimKind::other: return "other";
    }
    return "other";
}

std::string_view finding_status_name(FindingStatus status) {
    switch (status) {
        case FindingStatus::supported: return "supported";
        case FindingStatus::contradicted_by_flow: return "contradicted_by_flow";
        case FindingStatus::contradicted_by_registry: return "contradicted_by_registry";
        case FindingStatus::unverifiable: return "unverifiable";
    }
    return "unverifiable";
}

std::vector<Claim> extract_claims(std::string_view text, const DatasetSchema& schema,
                                  const ProtocolRegistry& registry) {
    return Extractor(text, schema, registry).run();
}

std::vector<Claim> extract_claims(std::string_view text) {
    static const DatasetSchema schema = builtin_schema(kUnswNb15V2);
    return extract_claims(text, schema, ProtocolRegistry::builtin());
}

FactCheckFinding check_claim(const Claim& claim, const FlowRecord& record,
                             const ProtocolRegistry& registry) {
    switch (claim.kind) {
        case ClaimKind::protocol_name: return check_protocol(claim, record, registry);
        case ClaimKind::port_service: return check_port(claim, record, registry);
        case ClaimKind::field_value: return check_field(claim, record);
        case ClaimKind::range_judgement: return check_range(claim, record);
        case ClaimKind::location:
            return {claim, FindingStatus::unverifiable,
                    "geolocation is not checked; no geo-IP database is configured", {}};
        case ClaimKind::other:
            break;
    }
    return {claim, FindingStatus::unverifiable, "no checkable pattern", {}};
}

std::vector<FactCheckFinding> fact_check(std::span<const Claim> claims, const FlowRecord& record,
                                         const ProtocolRegistry& registry) {
    std::vector<FactCheckFinding> out;
    out.reserve(claims.size());
    for (const auto& c : claims) out.push_back(check_claim(c, record, registry));
    return out;
}

}  // namespace nidsllm
