#include "nidsllm/registry.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "nidsllm/errors.hpp"

namespace nidsllm {

namespace detail {
extern const std::string_view kBuiltinRegistryText;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_aliases(const std::string& field) {
    std::vector<std::string> out;
    for (auto& a : split_fields(field, ';'))
        if (!a.empty()) out.push_back(std::move(a));
    return out;
}

std::uint32_t parse_uint(std::string_view s, const std::string& where) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw DataError(where + ": expected a number, got '" + std::string(s) + "'");
    return v;
}

std::string normalize(std::string_view name) {
    std::string out;
    for (unsigned char c : name)
        if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    constexpr std::string_view suffix = "protocol";
    if (out.size() > suffix.size() && out.ends_with(suffix)) out.resize(out.size() - suffix.size());
    return out;
}

}  // namespace

std::string_view transport_name(Transport t) {
    switch (t) {
        case Transport::tcp: return "tcp";
        case Transport::udp: return "udp";
        case Transport::any: return "any";
    }
    return "any";
}

Transport transport_of(std::uint32_t protocol_number) {
    if (protocol_number == 6) return Transport::tcp;
    if (protocol_number == 17) return Transport::udp;
    return Transport::any;
}

bool same_protocol_name(std::string_view a, std::string_view b) {
    const auto na = normalize(a);
    return !na.empty() && na == normalize(b);
}

ProtocolRegistry ProtocolRegistry::parse(std::string_view text, std::string source) {
    ProtocolRegistry reg;
    reg.source_ = std::move(source);
    enum class Section { none, l4, ports, l7 } section = Section::none;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto where = reg.source_ + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line == "[l4]") section = Section::l4;
            else if (line == "[ports]") section = Section::ports;
            else if (line == "[l7]") section = Section::l7;
            else throw DataError(where + ": unknown section " + std::string(line));
            continue;
        }
        if (section == Section::none) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos || trim(line.substr(0, eq)) != "version")
                throw DataError(where + ": expected 'version = <date>' or a section header");
            reg.version_ = std::string(trim(line.substr(eq + 1)));
            continue;
        }
        auto fields = split_fields(line, '|');
        if (section == Section::ports) {
            if (fields.size() < 2 || fields.size() > 4)
                throw DataError(where + ": port rows have 2 to 4 fields");
            fields.resize(4);
            PortEntry e;
            const auto slash = fields[0].find('/');
            if (slash == std::string::npos) throw DataError(where + ": port needs '/transport'");
            e.port = parse_uint(fields[0].substr(0, slash), where);
            const auto t = fields[0].substr(slash + 1);
            if (t == "tcp") e.transport = Transport::tcp;
            else if (t == "udp") e.transport = Transport::udp;
            else if (t == "any") e.transport = Transport::any;
            else throw DataError(where + ": unknown transport '" + t + "'");
            if (e.port > 65535) throw DataError(where + ": port out of range");
            e.service = fields[1];
            e.aliases = split_aliases(fields[2]);
            e.note = fields[3];
            reg.ports_.push_back(std::move(e));
        } else {
            if (fields.size() < 2 || fields.size() > 3)
                throw DataError(where + ": protocol rows have 2 or 3 fields");
            fields.resize(3);
            ProtocolEntry e;
            e.number = parse_uint(fields[0], where);
            e.name = fields[1];
            if (e.name.empty()) throw DataError(where + ": empty protocol name");
            e.aliases = split_aliases(fields[2]);
            auto& table = section == Section::l4 ? reg.l4_ : reg.l7_;
            if (table.contains(e.number))
                throw DataError(where + ": duplicate number " + std::to_string(e.number));
            table.emplace(e.number, std::move(e));
        }
    }
    reg.index_names();
    return reg;
}

ProtocolRegistry ProtocolRegistry::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read registry " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

const ProtocolRegistry& ProtocolRegistry::builtin() {
    static const ProtocolRegistry reg = parse(detail::kBuiltinRegistryText, "builtin");
    return reg;
}

void ProtocolRegistry::index_names() {
    std::set<std::string> protocols;
    std::set<std::string> services;
    for (const auto* table : {&l4_, &l7_}) {
        for (const auto& [n, e] : *table) {
            protocols.insert(e.name);
            protocols.insert(e.aliases.begin(), e.aliases.end());
        }
    }
    for (const auto& p : ports_) {
        if (!p.service.empty()) services.insert(p.service);
        services.insert(p.aliases.begin(), p.aliases.end());
    }
    // Longest first so "NetBIOS Session Service" wins over "NetBIOS".
    auto by_length = [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    };
    protocol_names_.assign(protocols.begin(), protocols.end());
    service_names_.assign(services.begin(), services.end());
    std::sort(protocol_names_.begin(), protocol_names_.end(), by_length);
    std::sort(service_names_.begin(), service_names_.end(), by_length);
}

const ProtocolEntry* ProtocolRegistry::l4(std::uint32_t number) const {
    auto it = l4_.find(number);
    return it == l4_.end() ? nullptr : &it->second;
}

const ProtocolEntry* ProtocolRegistry::l7(std::uint32_t number) const {
    auto it = l7_.find(number);
    return it == l7_.end() ? nullptr : &it->second;
}

std::vector<const PortEntry*> ProtocolRegistry::ports(std::uint32_t port,
                                                      Transport transport) const {
    std::vector<const PortEntry*> all;
    std::vector<const PortEntry*> narrowed;
    for (const auto& e : ports_) {
        if (e.port != port) continue;
        all.push_back(&e);
        if (transport == Transport::any || e.transport == Transport::any ||
            e.transport == transport)
            narrowed.push_back(&e);
    }
    return narrowed.empty() ? all : narrowed;
}

bool ProtocolRegistry::matches(const ProtocolEntry& entry, std::string_view name) {
    if (same_protocol_name(entry.name, name)) return true;
    return std::any_of(entry.aliases.begin(), entry.aliases.end(),
                       [&](const std::string& a) { return same_protocol_name(a, name); });
}

bool ProtocolRegistry::matches(const PortEntry& entry, std::string_view name) {
    if (!entry.service.empty() && same_protocol_name(entry.service, name)) return true;
    return std::any_of(entry.aliases.begin(), entry.aliases.end(),
                       [&](const std::string& a) { return same_protocol_name(a, name); });
}

}  // namespace nidsllm
