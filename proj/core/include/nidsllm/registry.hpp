#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nidsllm {

enum class Transport { tcp, udp, any };
std::string_view transport_name(Transport t);

struct ProtocolEntry {
    std::uint32_t number = 0;
    std::string name;
    std::vector<std::string> aliases;
};

struct PortEntry {
    std::uint32_t port = 0;
    Transport transport = Transport::any;
    std::string service;  // empty when no service is bound (port 0)
    std::vector<std::string> aliases;
    std::string note;
};

// Names compare case-insensitively, ignoring punctuation and spacing, and
// with a trailing "protocol" dropped ("Host Identity Protocol" == "host identity").
bool same_protocol_name(std::string_view a, std::string_view b);

// Layer-4 protocol numbers, well-known ports and flow-exporter application ids.
//
// File layout: an optional `version = <date>` line, then `[l4]`, `[ports]` and
// `[l7]` sections of '|' separated rows; see data/protocol_registry.txt.
class ProtocolRegistry {
public:
    static ProtocolRegistry parse(std::string_view text, std::string source);
    static ProtocolRegistry load(const std::filesystem::path& path);
    static const ProtocolRegistry& builtin();

    const std::string& version() const noexcept { return version_; }
    const std::string& source() const noexcept { return source_; }

    const ProtocolEntry* l4(std::uint32_t number) const;
    const ProtocolEntry* l7(std::uint32_t number) const;
    // Entries for a port; narrowed to `transport` when any entry matches it.
    std::vector<const PortEntry*> ports(std::uint32_t port,
                                        Transport transport = Transport::any) const;

    static bool matches(const ProtocolEntry& entry, std::string_view name);
    static bool matches(const PortEntry& entry, std::string_view name);

    // Every L4/L7 protocol name and alias, and every port service name and
    // alias, used by the claim extractor.
    const std::vector<std::string>& protocol_names() const noexcept { return protocol_names_; }
    const std::vector<std::string>& service_names() const noexcept { return service_names_; }

    const std::map<std::uint32_t, ProtocolEntry>& l4_table() const noexcept { return l4_; }
    const std::map<std::uint32_t, ProtocolEntry>& l7_table() const noexcept { return l7_; }
    const std::vector<PortEntry>& port_table() const noexcept { return ports_; }

private:
    void index_names();

    std::string version_;
    std::string source_;
    std::map<std::uint32_t, ProtocolEntry> l4_;
    std::map<std::uint32_t, ProtocolEntry> l7_;
    std::vector<PortEntry> ports_;
    std::vector<std::string> protocol_names_;
    std::vector<std::string> service_names_;
};

// Transport for an IANA protocol number (6 tcp, 17 udp, otherwise any).
Transport transport_of(std::uint32_t protocol_number);

}  // namespace nidsllm
