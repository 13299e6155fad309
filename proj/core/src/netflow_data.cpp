#include "nidsllm/netflow_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/rng.hpp"

namespace nidsllm {

namespace {

// Feature set shared by the NetFlow v2 datasets (43 columns, exporter order).
const std::vector<std::string>& netflow_v2_features() {
    static const std::vector<std::string> features = {
        "IPV4_SRC_ADDR",
        "L4_SRC_PORT",
        "IPV4_DST_ADDR",
        "L4_DST_PORT",
        "PROTOCOL",
        "L7_PROTO",
        "IN_BYTES",
        "IN_PKTS",
        "OUT_BYTES",
        "OUT_PKTS",
        "TCP_FLAGS",
        "CLIENT_TCP_FLAGS",
        "SERVER_TCP_FLAGS",
        "FLOW_DURATION_MILLISECONDS",
        "DURATION_IN",
        "DURATION_OUT",
        "MIN_TTL",
        "MAX_TTL",
        "LONGEST_FLOW_PKT",
        "SHORTEST_FLOW_PKT",
        "MIN_IP_PKT_LEN",
        "MAX_IP_PKT_LEN",
        "SRC_TO_DST_SECOND_BYTES",
        "DST_TO_SRC_SECOND_BYTES",
        "RETRANSMITTED_IN_BYTES",
        "RETRANSMITTED_IN_PKTS",
        "RETRANSMITTED_OUT_BYTES",
        "RETRANSMITTED_OUT_PKTS",
        "SRC_TO_DST_AVG_THROUGHPUT",
        "DST_TO_SRC_AVG_THROUGHPUT",
        "NUM_PKTS_UP_TO_128_BYTES",
        "NUM_PKTS_128_TO_256_BYTES",
        "NUM_PKTS_256_TO_512_BYTES",
        "NUM_PKTS_512_TO_1024_BYTES",
        "NUM_PKTS_1024_TO_1514_BYTES",
        "TCP_WIN_MAX_IN",
        "TCP_WIN_MAX_OUT",
        "ICMP_TYPE",
        "ICMP_IPV4_TYPE",
        "DNS_QUERY_ID",
        "DNS_QUERY_TYPE",
        "DNS_TTL_ANSWER",
        "FTP_COMMAND_RET_CODE",
    };
    return features;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

// Positions grouped by stratum key; std::map gives name order.
std::map<std::string, std::vector<std::size_t>> group_by(const std::vector<std::string>& keys) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i]].push_back(i);
    return groups;
}

struct QuotaSeed {
    std::size_t floor;
    long double remainder;
};

// Hands out total - sum(floor) extra units by largest remainder; ties keep the
// earlier (name-ordered) stratum.
std::vector<std::size_t> distribute(const std::vector<QuotaSeed>& seeds, std::size_t total) {
    std::vector<std::size_t> quotas(seeds.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        quotas[i] = seeds[i].floor;
        assigned += seeds[i].floor;
    }
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return seeds[a].remainder > seeds[b].remainder;
    });
    for (std::size_t i = 0; assigned < total && i < order.size(); ++i) {
        if (seeds[order[i]].remainder <= 0) break;
        ++quotas[order[i]];
        ++assigned;
    }
    return quotas;
}

FlowTable select_sorted(const FlowTable& table, std::vector<std::size_t> positions,
                        std::string_view tag) {
    std::sort(positions.begin(), positions.end());
    return table.select(positions, tag);
}

}  // namespace

void DatasetSchema::validate() const {
    if (feature_names.empty()) throw SchemaError("schema '" + id + "' has no feature columns");
    std::set<std::string_view> seen;
    for (const auto& name : feature_names) {
        if (name.empty()) throw SchemaError("schema '" + id + "' has an empty column name");
        if (!seen.insert(name).second)
            throw SchemaError("schema '" + id + "' lists column '" + name + "' twice");
    }
    if (label_column.empty() || attack_column.empty())
        throw SchemaError("schema '" + id + "' needs label and attack columns");
    if (label_column == attack_column)
        throw SchemaError("schema '" + id + "': label and attack columns must differ");
    if (seen.contains(label_column))
        throw SchemaError("schema '" + id + "': label column '" + label_column +
                          "' is also a feature");
    if (seen.contains(attack_column))
        throw SchemaError("schema '" + id + "': attack column '" + attack_column +
                          "' is also a feature");
}

std::optional<std::size_t> DatasetSchema::index_of(std::string_view feature) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), feature);
    if (it == feature_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - feature_names.begin());
}

DatasetSchema DatasetSchema::without(std::span<const std::string> excluded) const {
    DatasetSchema out = *this;
    for (const auto& name : excluded) {
        auto it = std::find(out.feature_names.begin(), out.feature_names.end(), name);
        if (it == out.feature_names.end())
            throw SchemaError("cannot exclude unknown column '" + name + "'");
        out.feature_names.erase(it);
    }
    out.validate();
    return out;
}

std::vector<std::string> builtin_schema_ids() {
    return {std::string(kUnswNb15V2), std::string(kCseCicIds2018V2)};
}

DatasetSchema builtin_schema(std::string_view id) {
    for (const auto& known : builtin_schema_ids()) {
        if (iequals(known, id)) {
            DatasetSchema schema;
            schema.id = known;
            schema.feature_names = netflow_v2_features();
            return schema;
        }
    }
    throw SchemaError("unknown built-in schema '" + std::string(id) + "'");
}

DatasetSchema parse_schema(std::string_view text, std::string id) {
    DatasetSchema schema;
    schema.id = std::move(id);
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.starts_with("label=")) {
            schema.label_column = std::string(trim(line.substr(6)));
        } else if (line.starts_with("attack=")) {
            schema.attack_column = std::string(trim(line.substr(7)));
        } else {
            schema.feature_names.emplace_back(line);
        }
    }
    schema.validate();
    return schema;
}

DatasetSchema load_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read schema file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_schema(buffer.str(), path.stem().string());
}

DatasetSchema resolve_schema(std::string_view id_or_path) {
    for (const auto& known : builtin_schema_ids())
        if (iequals(known, id_or_path)) return builtin_schema(known);
    const std::filesystem::path path{std::string(id_or_path)};
    if (std::filesystem::exists(path)) return load_schema_file(path);
    throw SchemaError("'" + std::string(id_or_path) +
                      "' is neither a built-in schema nor a schema file");
}

bool is_benign_attack(std::string_view attack_type) {
    return iequals(trim(attack_type), "benign");
}

FlowRecord::FlowRecord(std::shared_ptr<const DatasetSchema> schema,
                       std::span<const std::string_view> values, int label,
                       std::string attack_type, std::size_t source_row)
    : schema_(std::move(schema)) {
    if (!schema_) throw ArgumentError("FlowRecord needs a schema");
    if (values.size() != schema_->feature_names.size())
        throw SchemaError("record has " + std::to_string(values.size()) + " values, schema '" +
                          schema_->id + "' has " +
                          std::to_string(schema_->feature_names.size()) + " features");
    if (label != 0 && label != 1)
        throw DataError("label must be 0 or 1, got " + std::to_string(label));
    if ((label == 0) != is_benign_attack(attack_type))
        throw DataError("label " + std::to_string(label) + " inconsistent with attack type '" +
                        attack_type + "'");

    auto row = std::make_shared<Row>();
    std::size_t bytes = 0;
    for (auto v : values) bytes += v.size();
    if (bytes > std::numeric_limits<std::uint32_t>::max())
        throw DataError("record too large");
    row->buffer.reserve(bytes);
    row->ends.reserve(values.size());
    for (auto v : values) {
        row->buffer.append(v);
        row->ends.push_back(static_cast<std::uint32_t>(row->buffer.size()));
    }
    row->label = label;
    row->attack_type = std::move(attack_type);
    row->source_row = source_row;
    row_ = std::move(row);
}

std::string_view FlowRecord::value(std::size_t i) const {
    const std::uint32_t begin = i == 0 ? 0 : row_->ends[i - 1];
    return std::string_view(row_->buffer).substr(begin, row_->ends[i] - begin);
}

std::optional<std::string_view> FlowRecord::find(std::string_view feature) const {
    auto idx = schema_->index_of(feature);
    if (!idx) return std::nullopt;
    return value(*idx);
}

bool FlowRecord::same_content(const FlowRecord& other) const {
    if (row_ == other.row_) return true;
    return row_->buffer == other.row_->buffer && row_->ends == other.row_->ends &&
           row_->label == other.row_->label && row_->attack_type == other.row_->attack_type;
}

FlowTable::FlowTable(std::shared_ptr<const DatasetSchema> schema, std::vector<FlowRecord> rows,
                     Provenance provenance)
    : schema_(std::move(schema)), rows_(std::move(rows)), provenance_(std::move(provenance)) {
    if (!schema_) throw ArgumentError("FlowTable needs a schema");
    for (const auto& row : rows_) {
        if (row.schema_ptr() != schema_ && !(row.schema() == *schema_))
            throw SchemaError("row does not conform to table schema '" + schema_->id + "'");
    }
    provenance_.row_count = rows_.size();
}

FlowTable FlowTable::select(std::span<const std::size_t> positions, std::string_view tag) const {
    std::vector<FlowRecord> out;
    out.reserve(positions.size());
    for (auto p : positions) {
        if (p >= rows_.size()) throw ArgumentError("row position out of range");
        out.push_back(rows_[p]);
    }
    Provenance prov{provenance_.source, out.size()};
    if (!tag.empty()) prov.source += "#" + std::string(tag);
    return FlowTable(schema_, std::move(out), std::move(prov));
}

std::vector<int> FlowTable::labels() const {
    std::vector<int> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.label());
    return out;
}

FlowTable parse_dataset(std::istream& in, const DatasetSchema& schema_in, std::string source) {
    schema_in.validate();
    auto schema = std::make_shared<const DatasetSchema>(schema_in);

    std::vector<std::string> fields;
    if (!csv::read_record(in, fields)) throw DataError(source + ": no header row");
    if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
    for (auto& f : fields) f = std::string(trim(f));

    auto column_of = [&](const std::string& name) {
        auto it = std::find(fields.begin(), fields.end(), name);
        if (it == fields.end())
            throw SchemaError(source + ": missing column '" + name + "' required by schema '" +
                              schema->id + "'");
        return static_cast<std::size_t>(it - fields.begin());
    };
    std::vector<std::size_t> feature_cols;
    feature_cols.reserve(schema->feature_names.size());
    for (const auto& name : schema->feature_names) feature_cols.push_back(column_of(name));
    const std::size_t label_col = column_of(schema->label_column);
    const std::size_t attack_col = column_of(schema->attack_column);
    const std::size_t width = fields.size();

    std::vector<FlowRecord> rows;
    std::vector<std::string_view> values(feature_cols.size());
    std::size_t row_number = 0;
    while (csv::read_record(in, fields)) {
        ++row_number;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != width)
            throw DataError(source + ": row " + std::to_string(row_number) + ": expected " +
                            std::to_string(width) + " fields, got " +
                            std::to_string(fields.size()));
        const std::string_view label_text = trim(fields[label_col]);
        int label;
        if (label_text == "0") {
            label = 0;
        } else if (label_text == "1") {
            label = 1;
        } else {
            throw DataError(source + ": row " + std::to_string(row_number) + ": label '" +
                            std::string(label_text) + "' is not 0 or 1");
        }
        for (std::size_t i = 0; i < feature_cols.size(); ++i) values[i] = fields[feature_cols[i]];
        try {
            rows.emplace_back(schema, values, label, std::string(trim(fields[attack_col])),
                              rows.size());
        } catch (const Error& e) {
            throw DataError(source + ": row " + std::to_string(row_number) + ": " + e.what());
        }
    }
    if (rows.empty()) throw DataError(source + ": no rows");
    return FlowTable(schema, std::move(rows), Provenance{std::move(source), 0});
}

FlowTable load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path.string());
    return parse_dataset(in, schema, path.string());
}

void write_dataset(const FlowTable& table, std::ostream& out) {
    const auto& schema = table.schema();
    for (const auto& name : schema.feature_names) out << csv::escape(name) << ',';
    out << csv::escape(schema.label_column) << ',' << csv::escape(schema.attack_column) << '\n';
    for (const auto& row : table) {
        for (std::size_t i = 0; i < row.size(); ++i) out << csv::escape(row.value(i)) << ',';
        out << row.label() << ',' << csv::escape(row.attack_type()) << '\n';
    }
    if (!out) throw IoError("failed writing dataset");
}

std::vector<std::size_t> allocate_quotas(std::span<const std::size_t> stratum_sizes,
                                         std::span<const std::string> stratum_names,
                                         std::size_t total) {
    if (stratum_sizes.size() != stratum_names.size())
        throw ArgumentError("allocate_quotas: sizes and names differ in length");
    const std::size_t n = std::accumulate(stratum_sizes.begin(), stratum_sizes.end(),
                                          std::size_t{0});
    if (total > n) throw ArgumentError("allocate_quotas: total exceeds population");
    if (n == 0) return std::vector<std::size_t>(stratum_sizes.size(), 0);

    // Exact integer quotas total * size / n.
    std::vector<std::size_t> order(stratum_sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return stratum_names[a] < stratum_names[b]; });
    std::vector<QuotaSeed> seeds;
    seeds.reserve(order.size());
    for (auto i : order) {
        const unsigned __int128 scaled =
            static_cast<unsigned __int128>(total) * static_cast<unsigned __int128>(stratum_sizes[i]);
        seeds.push_back({static_cast<std::size_t>(scaled / n),
                         static_cast<long double>(static_cast<std::uint64_t>(scaled % n))});
    }
    auto ordered = distribute(seeds, total);
    std::vector<std::size_t> quotas(stratum_sizes.size());
    for (std::size_t k = 0; k < order.size(); ++k) quotas[order[k]] = ordered[k];
    return quotas;
}

std::vector<std::string> stratum_keys(const FlowTable& table, std::string_view column) {
    const auto& schema = table.schema();
    std::vector<std::string> keys;
    keys.reserve(table.size());
    if (column.empty() || column == schema.attack_column) {
        for (const auto& r : table) keys.push_back(r.attack_type());
    } else if (column == schema.label_column) {
        for (const auto& r : table) keys.push_back(std::to_string(r.label()));
    } else if (auto idx = schema.index_of(column)) {
        for (const auto& r : table) keys.emplace_back(r.value(*idx));
    } else {
        throw SchemaError("cannot stratify by unknown column '" + std::string(column) + "'");
    }
    return keys;
}

SplitIndices stratified_split_indices(const FlowTable& table, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw ArgumentError("test_fraction must lie in (0, 1)");
    const auto groups = group_by(stratum_keys(table, spec.stratify_by));
    const long double f = spec.test_fraction;
    const auto total = static_cast<std::size_t>(std::llround(f * table.size()));

    // Per-stratum quotas f*|s|, snapped so that binary rounding of f does not
    // push an exact quota over an integer boundary.
    std::vector<QuotaSeed> seeds;
    for (const auto& [name, members] : groups) {
        const long double exact = f * static_cast<long double>(members.size());
        long double whole = std::floor(exact);
        long double frac = exact - whole;
        if (frac > 1.0L - 1e-9L) {
            whole += 1;
            frac = 0;
        } else if (frac < 1e-9L) {
            frac = 0;
        }
        seeds.push_back({static_cast<std::size_t>(whole), frac});
    }
    const auto quotas = distribute(seeds, total);

    Rng rng(spec.seed);
    SplitIndices out;
    std::size_t g = 0;
    for (const auto& [name, members] : groups) {
        std::vector<std::size_t> shuffled = members;
        rng.shuffle(std::span<std::size_t>(shuffled));
        const std::size_t q = std::min(quotas[g++], shuffled.size());
        out.test.insert(out.test.end(), shuffled.begin(), shuffled.begin() + q);
        out.train.insert(out.train.end(), shuffled.begin() + q, shuffled.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

TrainTest stratified_split(const FlowTable& table, const SplitSpec& spec) {
    auto idx = stratified_split_indices(table, spec);
    return {table.select(idx.train, "train"), table.select(idx.test, "test")};
}

std::vector<std::vector<std::size_t>> kfold_indices(const FlowTable& table, int k,
                                                    std::uint64_t seed) {
    if (k < 2) throw ArgumentError("kfold: k must be at least 2");
    if (static_cast<std::size_t>(k) > table.size())
        throw ArgumentError("kfold: k=" + std::to_string(k) + " exceeds row count " +
                            std::to_string(table.size()));
    const auto groups = group_by(stratum_keys(table, {}));
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t dealt = 0;
    for (const auto& [name, members] : groups) {
        std::vector<std::size_t> shuffled = members;
        rng.shuffle(std::span<std::size_t>(shuffled));
        for (auto p : shuffled) folds[dealt++ % folds.size()].push_back(p);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<Fold> kfold(const FlowTable& table, int k, std::uint64_t seed) {
    const auto test_sets = kfold_indices(table, k, seed);
    std::vector<Fold> folds;
    folds.reserve(test_sets.size());
    for (std::size_t f = 0; f < test_sets.size(); ++f) {
        std::vector<char> in_test(table.size(), 0);
        for (auto p : test_sets[f]) in_test[p] = 1;
        std::vector<std::size_t> train;
        train.reserve(table.size() - test_sets[f].size());
        for (std::size_t p = 0; p < table.size(); ++p)
            if (!in_test[p]) train.push_back(p);
        const std::string tag = "fold" + std::to_string(f);
        folds.push_back({table.select(train, tag + "-train"), table.select(test_sets[f], tag)});
    }
    return folds;
}

std::vector<std::size_t> subsample_indices(const FlowTable& table, std::size_t n, bool stratified,
                                           std::uint64_t seed) {
    if (n > table.size())
        throw ArgumentError("subsample: n=" + std::to_string(n) + " exceeds row count " +
                            std::to_string(table.size()));
    Rng rng(seed);
    std::vector<std::size_t> picked;
    picked.reserve(n);
    if (!stratified) {
        std::vector<std::size_t> all(table.size());
        std::iota(all.begin(), all.end(), 0);
        rng.shuffle(std::span<std::size_t>(all));
        picked.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        const auto groups = group_by(stratum_keys(table, {}));
        std::vector<std::size_t> sizes;
        std::vector<std::string> names;
        for (const auto& [name, members] : groups) {
            names.push_back(name);
            sizes.push_back(members.size());
        }
        const auto quotas = allocate_quotas(sizes, names, n);
        std::size_t g = 0;
        for (const auto& [name, members] : groups) {
            std::vector<std::size_t> shuffled = members;
            rng.shuffle(std::span<std::size_t>(shuffled));
            picked.insert(picked.end(), shuffled.begin(),
                          shuffled.begin() + static_cast<std::ptrdiff_t>(quotas[g++]));
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

FlowTable subsample(const FlowTable& table, std::size_t n, bool stratified, std::uint64_t seed) {
    return select_sorted(table, subsample_indices(table, n, stratified, seed), "sample");
}

}  // namespace nidsllm
