#include "fixtures.hpp"

#include <stdlib.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nidsllm/rng.hpp"

namespace nidsllm::testing {

namespace {

std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string header(const DatasetSchema& schema) {
    std::string line;
    for (const auto& f : schema.feature_names) line += csv_field(f) + ",";
    return line + schema.label_column + "," + schema.attack_column + "\n";
}

using Values = std::map<std::string, std::string>;

std::string num(std::uint64_t v) { return std::to_string(v); }

std::uint64_t between(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
    return lo + rng.below(hi - lo + 1);
}

std::string ip(const char* prefix, Rng& rng) { return std::string(prefix) + num(between(rng, 1, 30)); }

void fill_volume(Values& v, Rng& rng, std::uint64_t in_bytes, std::uint64_t in_pkts,
                 std::uint64_t out_bytes, std::uint64_t out_pkts, std::uint64_t duration) {
    v["IN_BYTES"] = num(in_bytes);
    v["IN_PKTS"] = num(in_pkts);
    v["OUT_BYTES"] = num(out_bytes);
    v["OUT_PKTS"] = num(out_pkts);
    v["FLOW_DURATION_MILLISECONDS"] = num(duration);
    v["DURATION_IN"] = num(duration);
    v["DURATION_OUT"] = num(duration / 2);
    const auto shortest = std::min(in_bytes / std::max<std::uint64_t>(in_pkts, 1), out_bytes / std::max<std::uint64_t>(out_pkts, 1));
    const auto longest = std::max(in_bytes / std::max<std::uint64_t>(in_pkts, 1), out_bytes / std::max<std::uint64_t>(out_pkts, 1));
    v["SHORTEST_FLOW_PKT"] = num(shortest);
    v["LONGEST_FLOW_PKT"] = num(longest);
    v["MIN_IP_PKT_LEN"] = num(shortest);
    v["MAX_IP_PKT_LEN"] = num(longest);
    const auto secs = std::max<std::uint64_t>(duration / 1000, 1);
    v["SRC_TO_DST_SECOND_BYTES"] = num(in_bytes / secs);
    v["DST_TO_SRC_SECOND_BYTES"] = num(out_bytes / secs);
    v["SRC_TO_DST_AVG_THROUGHPUT"] = num(in_bytes * 8000 / std::max<std::uint64_t>(duration, 1));
    v["DST_TO_SRC_AVG_THROUGHPUT"] = num(out_bytes * 8000 / std::max<std::uint64_t>(duration, 1));
    v["NUM_PKTS_UP_TO_128_BYTES"] = num(longest <= 128 ? in_pkts + out_pkts : 1);
    v["NUM_PKTS_128_TO_256_BYTES"] = num(longest > 128 && longest <= 256 ? in_pkts : 0);
    v["NUM_PKTS_1024_TO_1514_BYTES"] = num(longest > 1024 ? in_pkts + out_pkts - 1 : 0);
    (void)rng;
}

void tcp(Values& v, Rng& rng, std::uint64_t flags) {
    v["PROTOCOL"] = "6";
    v["TCP_FLAGS"] = num(flags);
    v["CLIENT_TCP_FLAGS"] = num(flags & 0x1b);
    v["SERVER_TCP_FLAGS"] = num(flags & 0x13);
    v["TCP_WIN_MAX_IN"] = num(between(rng, 1000, 65535));
    v["TCP_WIN_MAX_OUT"] = num(between(rng, 1000, 65535));
}

Values benign_profile(Rng& rng) {
    Values v;
    v["IPV4_SRC_ADDR"] = ip("59.166.0.", rng);
    v["IPV4_DST_ADDR"] = ip("149.171.126.", rng);
    v["L4_SRC_PORT"] = num(between(rng, 1024, 65535));
    const auto ttl = between(rng, 31, 32);
    v["MIN_TTL"] = num(ttl);
    v["MAX_TTL"] = num(ttl);
    switch (rng.below(3)) {
        case 0:  // DNS lookup
            v["L4_DST_PORT"] = "53";
            v["PROTOCOL"] = "17";
            v["L7_PROTO"] = "5";
            fill_volume(v, rng, between(rng, 60, 90), 1, between(rng, 70, 140), 1, 0);
            v["DNS_QUERY_ID"] = num(between(rng, 1, 65535));
            v["DNS_QUERY_TYPE"] = "1";
            v["DNS_TTL_ANSWER"] = num(between(rng, 60, 3600));
            break;
        case 1:  // web
            v["L4_DST_PORT"] = "80";
            v["L7_PROTO"] = "7";
            tcp(v, rng, 27);
            fill_volume(v, rng, between(rng, 400, 3000), between(rng, 4, 20), between(rng, 1000, 30000),
                        between(rng, 4, 30), between(rng, 0, 1500));
            break;
        default:  // ssh / mail
            v["L4_DST_PORT"] = rng.below(2) ? "22" : "25";
            v["L7_PROTO"] = v["L4_DST_PORT"] == "22" ? "92" : "3";
            tcp(v, rng, 27);
            fill_volume(v, rng, between(rng, 1000, 8000), between(rng, 10, 40), between(rng, 1000, 8000),
                        between(rng, 10, 40), between(rng, 100, 8000));
            break;
    }
    return v;
}

Values malicious_profile(const std::string& attack, Rng& rng) {
    Values v;
    v["IPV4_SRC_ADDR"] = ip("175.45.176.", rng);
    v["IPV4_DST_ADDR"] = ip("149.171.126.", rng);
    v["L4_SRC_PORT"] = num(between(rng, 1024, 65535));
    v["MIN_TTL"] = "254";
    v["MAX_TTL"] = "254";
    if (attack == "Reconnaissance") {
        if (rng.below(2)) {
            v["PROTOCOL"] = "1";
            v["L4_SRC_PORT"] = "0";
            v["L4_DST_PORT"] = "0";
            v["ICMP_TYPE"] = "2048";
            v["ICMP_IPV4_TYPE"] = "8";
            fill_volume(v, rng, between(rng, 28, 64), 1, 0, 0, 0);
        } else {
            v["L4_DST_PORT"] = num(between(rng, 1, 1024));
            tcp(v, rng, 2);
            fill_volume(v, rng, 44, 1, 40, 1, 0);
        }
    } else if (attack == "Generic") {
        v["L4_DST_PORT"] = "53";
        v["PROTOCOL"] = "17";
        v["L7_PROTO"] = "5";
        fill_volume(v, rng, between(rng, 100, 250), 2, between(rng, 0, 90), between(rng, 0, 1), 0);
    } else if (attack == "DoS") {
        v["L4_DST_PORT"] = "80";
        v["L7_PROTO"] = "7";
        tcp(v, rng, 31);
        fill_volume(v, rng, between(rng, 5000, 200000), between(rng, 50, 400), between(rng, 0, 500),
                    between(rng, 0, 5), between(rng, 0, 3000));
    } else if (attack == "Fuzzers") {
        v["L4_DST_PORT"] = num(between(rng, 1, 65535));
        tcp(v, rng, 30);
        fill_volume(v, rng, between(rng, 100, 700), between(rng, 1, 10), between(rng, 0, 400),
                    between(rng, 0, 6), between(rng, 0, 20000));
    } else {
        static const char* ports[] = {"80", "111", "139", "445", "21", "143"};
        v["L4_DST_PORT"] = ports[rng.below(6)];
        v["PROTOCOL"] = rng.below(10) == 0 ? "139" : "6";
        if (v["PROTOCOL"] == "6") tcp(v, rng, 31);
        fill_volume(v, rng, between(rng, 800, 50000), between(rng, 6, 80), between(rng, 200, 20000),
                    between(rng, 2, 40), between(rng, 0, 6000));
    }
    return v;
}

}  // namespace

std::string synthetic_csv(const SyntheticSpec& spec) {
    if (spec.attacks.empty()) throw std::invalid_argument("synthetic: no attack types");
    const auto schema = builtin_schema(kUnswNb15V2);
    Rng rng(spec.seed);
    const auto n_mal = static_cast<std::size_t>(
        std::llround(static_cast<double>(spec.rows) * spec.malicious_fraction));
    std::vector<std::string> attack_of(spec.rows, "Benign");
    for (std::size_t i = 0; i < n_mal; ++i)
        attack_of[spec.rows - n_mal + i] = spec.attacks[i % spec.attacks.size()];
    rng.shuffle(std::span<std::string>(attack_of));

    std::string out = header(schema);
    out.reserve(spec.rows * 220);
    for (const auto& attack : attack_of) {
        const bool malicious = attack != "Benign";
        const bool swap = spec.overlap > 0 && rng.unit() < spec.overlap;
        Values v;
        if (malicious != swap)
            v = malicious_profile(malicious ? attack : spec.attacks[rng.below(spec.attacks.size())], rng);
        else
            v = benign_profile(rng);
        for (const auto& f : schema.feature_names) {
            auto it = v.find(f);
            out += it == v.end() ? "0" : it->second;
            out += ',';
        }
        out += malicious ? "1," : "0,";
        out += attack;
        out += '\n';
    }
    return out;
}

FlowTable synthetic_flows(const SyntheticSpec& spec) {
    std::istringstream in(synthetic_csv(spec));
    return parse_dataset(in, builtin_schema(kUnswNb15V2), "synthetic");
}

FlowTable make_table(const DatasetSchema& schema, const std::vector<RowSpec>& rows) {
    std::string text = header(schema);
    for (const auto& r : rows) {
        for (const auto& v : r.values) text += csv_field(v) + ",";
        text += std::to_string(r.label) + "," + csv_field(r.attack) + "\n";
    }
    std::istringstream in(text);
    return parse_dataset(in, schema, "inline");
}

DatasetSchema numbered_schema(std::size_t features, std::string id) {
    DatasetSchema s;
    s.id = std::move(id);
    for (std::size_t i = 0; i < features; ++i) s.feature_names.push_back("F" + std::to_string(i));
    return s;
}

FlowTable strata_table(const std::vector<std::size_t>& sizes, std::size_t features) {
    const auto schema = numbered_schema(features);
    std::vector<RowSpec> rows;
    std::size_t n = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        for (std::size_t i = 0; i < sizes[s]; ++i, ++n) {
            RowSpec r;
            for (std::size_t f = 0; f < features; ++f) r.values.push_back(std::to_string(n * 10 + f));
            r.label = s == 0 ? 0 : 1;
            r.attack = s == 0 ? "Benign" : "S" + std::to_string(s);
            rows.push_back(std::move(r));
        }
    }
    return make_table(schema, rows);
}

FlowRecord unsw_flow(const std::map<std::string, std::string>& values, int label,
                     std::string attack) {
    const auto schema = builtin_schema(kUnswNb15V2);
    RowSpec r;
    for (const auto& f : schema.feature_names) {
        auto it = values.find(f);
        r.values.push_back(it == values.end() ? "0" : it->second);
    }
    for (const auto& [k, v] : values)
        if (!schema.index_of(k)) throw std::invalid_argument("unsw_flow: unknown feature " + k);
    r.label = label;
    r.attack = std::move(attack);
    return make_table(schema, {r})[0];
}

std::string dns_explanation() {
    return "- Protocol: The protocol used is UDP (17), which is commonly used for DNS queries. This "
           "suggests that the flow may be related to a legitimate DNS request.\n"
           "- Destination port: The destination port is 53, which is the standard port for DNS "
           "traffic.\n"
           "- Source and destination addresses: The source address is an IP address in China, "
           "while the destination address is an IP address in the United States. This could "
           "indicate that the flow is related to a legitimate DNS query from a Chinese user to a "
           "US-based DNS server.\n"
           "- Packet sizes and lengths: The packet sizes are relatively small (73-89 bytes), which "
           "is typical for DNS.\n"
           "- Flow duration: The flow duration is 0 milliseconds, indicating that this was likely a "
           "single, brief request-response exchange.\n";
}

FlowRecord dns_flow() {
    return unsw_flow({{"IPV4_SRC_ADDR", "59.166.0.6"},
                      {"L4_SRC_PORT", "52842"},
                      {"IPV4_DST_ADDR", "149.171.126.9"},
                      {"L4_DST_PORT", "53"},
                      {"PROTOCOL", "17"},
                      {"L7_PROTO", "5"},
                      {"IN_BYTES", "73"},
                      {"IN_PKTS", "1"},
                      {"OUT_BYTES", "89"},
                      {"OUT_PKTS", "1"},
                      {"FLOW_DURATION_MILLISECONDS", "0"},
                      {"MIN_TTL", "31"},
                      {"MAX_TTL", "31"},
                      {"LONGEST_FLOW_PKT", "89"},
                      {"SHORTEST_FLOW_PKT", "73"},
                      {"MIN_IP_PKT_LEN", "73"},
                      {"MAX_IP_PKT_LEN", "89"},
                      {"DNS_QUERY_ID", "32531"},
                      {"DNS_QUERY_TYPE", "1"},
                      {"DNS_TTL_ANSWER", "60"}});
}

TempDir::TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "nidsllm-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace nidsllm::testing
