#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nidsllm {

// Column layout of a NetFlow dataset. Feature order is the order used when
// flows are serialized into prompts.
struct DatasetSchema {
    std::string id;
    std::vector<std::string> feature_names;
    std::string label_column = "Label";
    std::string attack_column = "Attack";

    // Throws SchemaError when the invariants do not hold.
    void validate() const;

    std::optional<std::size_t> index_of(std::string_view feature) const;

    // Copy with the given feature columns removed. Unknown names throw SchemaError.
    DatasetSchema without(std::span<const std::string> excluded) const;

    bool operator==(const DatasetSchema&) const = default;
};

inline constexpr std::string_view kUnswNb15V2 = "NF-UNSW-NB15-v2";
inline constexpr std::string_view kCseCicIds2018V2 = "NF-CSE-CIC-IDS2018-v2";

std::vector<std::string> builtin_schema_ids();
DatasetSchema builtin_schema(std::string_view id);

// Schema file: one feature column per line, plus `label=<col>` and `attack=<col>`
// directives. Blank lines and lines starting with '#' are ignored.
DatasetSchema parse_schema(std::string_view text, std::string id);
DatasetSchema load_schema_file(const std::filesystem::path& path);

// Built-in id, or a path to a schema file.
DatasetSchema resolve_schema(std::string_view id_or_path);

bool is_benign_attack(std::string_view attack_type);

// One NetFlow entry. Values are the raw CSV text, in schema order. Copies share
// the underlying immutable row.
class FlowRecord {
public:
    struct Field {
        std::string_view name;
        std::string_view value;
    };

    FlowRecord(std::shared_ptr<const DatasetSchema> schema, std::span<const std::string_view> values,
               int label, std::string attack_type, std::size_t source_row);

    const DatasetSchema& schema() const noexcept { return *schema_; }
    const std::shared_ptr<const DatasetSchema>& schema_ptr() const noexcept { return schema_; }

    std::size_t size() const noexcept { return row_->ends.size(); }
    std::string_view value(std::size_t i) const;
    Field field(std::size_t i) const { return {schema_->feature_names[i], value(i)}; }
    std::optional<std::string_view> find(std::string_view feature) const;

    int label() const noexcept { return row_->label; }
    const std::string& attack_type() const noexcept { return row_->attack_type; }

    // 0-based data-row position in the source file.
    std::size_t source_row() const noexcept { return row_->source_row; }

    // Content equality; ignores source_row.
    bool same_content(const FlowRecord& other) const;

private:
    // All values concatenated; ends[i] is one past the last byte of value i.
    struct Row {
        std::string buffer;
        std::vector<std::uint32_t> ends;
        int label;
        std::string attack_type;
        std::size_t source_row;
    };

    std::shared_ptr<const DatasetSchema> schema_;
    std::shared_ptr<const Row> row_;
};

struct Provenance {
    std::string source;
    std::size_t row_count = 0;
};

class FlowTable {
public:
    FlowTable(std::shared_ptr<const DatasetSchema> schema, std::vector<FlowRecord> rows,
              Provenance provenance);

    const DatasetSchema& schema() const noexcept { return *schema_; }
    const std::shared_ptr<const DatasetSchema>& schema_ptr() const noexcept { return schema_; }
    const std::vector<FlowRecord>& rows() const noexcept { return rows_; }
    const Provenance& provenance() const noexcept { return provenance_; }

    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }
    const FlowRecord& operator[](std::size_t i) const { return rows_[i]; }
    auto begin() const noexcept { return rows_.begin(); }
    auto end() const noexcept { return rows_.end(); }

    // Rows at the given positions, in the given order.
    FlowTable select(std::span<const std::size_t> positions, std::string_view tag) const;

    std::vector<int> labels() const;

private:
    std::shared_ptr<const DatasetSchema> schema_;
    std::vector<FlowRecord> rows_;
    Provenance provenance_;
};

// Reads a CSV with a header row. Extra columns are ignored; values are kept as text.
FlowTable load_dataset(const std::filesystem::path& path, const DatasetSchema& schema);
FlowTable parse_dataset(std::istream& in, const DatasetSchema& schema, std::string source);

// Writes schema features, label and attack columns, in that order.
void write_dataset(const FlowTable& table, std::ostream& out);

struct SplitSpec {
    double test_fraction = 0.05;
    std::string stratify_by;  // empty selects the schema's attack column
    std::uint64_t seed = 0;
};

// Positions into the source table, each list ascending.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct TrainTest {
    FlowTable train;
    FlowTable test;
};

struct Fold {
    FlowTable train;
    FlowTable test;
};

// Largest-remainder apportionment of `total` across strata proportional to
// their sizes; ties go to the stratum that sorts first by name.
std::vector<std::size_t> allocate_quotas(std::span<const std::size_t> stratum_sizes,
                                         std::span<const std::string> stratum_names,
                                         std::size_t total);

// Stratum key of each row for a column (attack, label, or any feature).
std::vector<std::string> stratum_keys(const FlowTable& table, std::string_view column);

SplitIndices stratified_split_indices(const FlowTable& table, const SplitSpec& spec);
TrainTest stratified_split(const FlowTable& table, const SplitSpec& spec);

// Test positions of each fold, stratified by attack type.
std::vector<std::vector<std::size_t>> kfold_indices(const FlowTable& table, int k,
                                                    std::uint64_t seed);
std::vector<Fold> kfold(const FlowTable& table, int k, std::uint64_t seed);

std::vector<std::size_t> subsample_indices(const FlowTable& table, std::size_t n, bool stratified,
                                           std::uint64_t seed);
FlowTable subsample(const FlowTable& table, std::size_t n, bool stratified, std::uint64_t seed);

}  // namespace nidsllm
