#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nidsllm/netflow_data.hpp"

namespace nidsllm {

// Row-major numeric view of a FlowTable.
struct NumericMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::string> column_names;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(values).subspan(r * cols, cols);
    }
};

enum class NonNumericPolicy { drop, frequency };
std::string_view non_numeric_policy_name(NonNumericPolicy policy);
NonNumericPolicy parse_non_numeric_policy(std::string_view name);

struct NumericizeOptions {
    NonNumericPolicy non_numeric = NonNumericPolicy::drop;
};

// Column plan fitted on training rows: numeric columns are parsed with missing
// values replaced by the training median; text columns (e.g. addresses) are
// dropped or replaced by their training frequency.
class FeatureEncoder {
public:
    enum class ColumnKind { numeric, frequency };

    struct Column {
        std::string name;
        ColumnKind kind = ColumnKind::numeric;
        double median = 0.0;
        std::map<std::string, double> frequency;  // kind == frequency
    };

    static FeatureEncoder fit(const FlowTable& table, NumericizeOptions options = {});

    NumericMatrix transform(const FlowTable& table) const;
    const std::vector<Column>& columns() const noexcept { return columns_; }
    std::vector<std::string> column_names() const;

    std::string to_json() const;
    static FeatureEncoder from_json(std::string_view text);

private:
    std::vector<Column> columns_;
};

NumericMatrix numericize(const FlowTable& table, NumericizeOptions options = {});

// Empty, "nan", "na" and "null" (any case) count as missing.
bool is_missing_value(std::string_view raw);

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go right when value > threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t predicted = 0;
    std::array<std::uint64_t, 2> class_counts{};

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

class TreeModel {
public:
    TreeModel() = default;
    TreeModel(std::vector<TreeNode> nodes, std::vector<std::string> columns);

    int predict_row(std::span<const double> x) const;
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t count_nodes_by_traversal() const;
    int depth() const;

    bool operator==(const TreeModel&) const = default;

private:
    std::vector<TreeNode> nodes_;  // nodes_[0] is the root
    std::vector<std::string> columns_;
};

class ForestModel {
public:
    ForestModel() = default;
    ForestModel(std::vector<TreeModel> trees, std::vector<std::string> columns);

    // Majority vote; an even split goes to benign (0).
    int predict_row(std::span<const double> x) const;
    const std::vector<TreeModel>& trees() const noexcept { return trees_; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }
    std::size_t n_trees() const noexcept { return trees_.size(); }
    std::size_t node_count() const;

    bool operator==(const ForestModel&) const = default;

private:
    std::vector<TreeModel> trees_;
    std::vector<std::string> columns_;
};

struct TreeParams {
    int max_depth = -1;  // negative: unbounded
    std::size_t min_leaf = 1;
    std::uint64_t seed = 0;
};

struct ForestParams {
    std::size_t n_trees = 100;
    int max_depth = -1;
    std::size_t min_leaf = 1;
    std::size_t feature_subsample = 0;  // features tried per split; 0 selects floor(sqrt(D))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned workers = 0;  // 0 selects hardware concurrency; never changes the result
};

// Greedy CART growth minimising weighted Gini impurity. Candidate thresholds
// are midpoints between consecutive distinct values; equal-impurity splits
// resolve to the lowest feature index, then the lowest threshold.
TreeModel train_decision_tree(const NumericMatrix& data, std::span<const int> labels,
                              const TreeParams& params = {});

ForestModel train_random_forest(const NumericMatrix& data, std::span<const int> labels,
                                const ForestParams& params = {});

std::vector<int> predict(const TreeModel& model, const NumericMatrix& data);
std::vector<int> predict(const ForestModel& model, const NumericMatrix& data);

// Versioned JSON; identical models serialize to identical bytes.
std::string serialize(const TreeModel& model);
std::string serialize(const ForestModel& model);
TreeModel parse_tree_model(std::string_view text);
ForestModel parse_forest_model(std::string_view text);

// Model plus the encoder that produced its inputs.
struct BaselineModel {
    std::variant<TreeModel, ForestModel> model;
    FeatureEncoder encoder;

    std::string kind() const;  // "dt" or "rf"
    std::size_t node_count() const;
    std::vector<int> predict(const NumericMatrix& data) const;
    std::vector<int> predict(const FlowTable& table) const;
};

void save_baseline(const BaselineModel& model, const std::filesystem::path& path);
BaselineModel load_baseline(const std::filesystem::path& path);

}  // namespace nidsllm
