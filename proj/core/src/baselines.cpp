#include "nidsllm/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/rng.hpp"

namespace nidsllm {

using json = nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<double> parse_number(std::string_view raw) {
    while (!raw.empty() && raw.front() == ' ') raw.remove_prefix(1);
    while (!raw.empty() && raw.back() == ' ') raw.remove_suffix(1);
    if (!raw.empty() && raw.front() == '+') raw.remove_prefix(1);
    double value = 0;
    const auto* end = raw.data() + raw.size();
    auto [ptr, ec] = std::from_chars(raw.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                     values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower_v = *std::max_element(values.begin(),
                                             values.begin() + static_cast<std::ptrdiff_t>(mid));
    return lower_v / 2 + upper / 2;
}

void check_columns(const std::vector<std::string>& model_cols, const NumericMatrix& data) {
    if (model_cols != data.column_names)
        throw SchemaError("matrix columns do not match the columns the model was trained on");
}

void check_training_input(const NumericMatrix& data, std::span<const int> labels) {
    if (data.rows == 0 || data.cols == 0) throw ArgumentError("training matrix is empty");
    if (data.values.size() != data.rows * data.cols)
        throw ArgumentError("training matrix size does not match its shape");
    if (labels.size() != data.rows)
        throw ArgumentError("label count " + std::to_string(labels.size()) +
                            " does not match row count " + std::to_string(data.rows));
    for (int l : labels)
        if (l != 0 && l != 1) throw ArgumentError("labels must be 0 or 1");
    for (double v : data.values)
        if (!std::isfinite(v)) throw ArgumentError("training matrix holds a non-finite value");
}

// Column-major copy shared by all trees of one training call.
struct ColumnData {
    std::size_t rows;
    std::size_t cols;
    std::vector<double> values;

    explicit ColumnData(const NumericMatrix& m) : rows(m.rows), cols(m.cols), values(m.values.size()) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) values[c * rows + r] = m.values[r * cols + c];
    }
    const double* column(std::size_t c) const { return values.data() + c * rows; }
};

using Wide = __int128;

class TreeBuilder {
public:
    TreeBuilder(const ColumnData& data, const std::vector<std::uint8_t>& labels, int max_depth,
                std::size_t min_leaf, std::size_t features_per_split, bool shuffle_features,
                std::uint64_t seed)
        : data_(data),
          labels_(labels),
          max_depth_(max_depth),
          min_leaf_(std::max<std::size_t>(min_leaf, 1)),
          features_per_split_(std::clamp<std::size_t>(features_per_split, 1, data.cols)),
          shuffle_features_(shuffle_features),
          rng_(seed) {
        feature_order_.resize(data.cols);
    }

    std::vector<TreeNode> build(std::vector<std::uint32_t> samples) {
        samples_ = std::move(samples);
        nodes_.clear();
        nodes_.emplace_back();
        struct Task {
            std::int32_t node;
            std::size_t begin;
            std::size_t end;
            int depth;
        };
        std::vector<Task> stack{{0, 0, samples_.size(), 0}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            auto& node = nodes_[static_cast<std::size_t>(task.node)];
            std::array<std::uint64_t, 2> counts{};
            for (std::size_t i = task.begin; i < task.end; ++i) ++counts[labels_[samples_[i]]];
            node.class_counts = counts;
            node.predicted = counts[1] > counts[0] ? 1 : 0;

            const std::size_t n = task.end - task.begin;
            const bool pure = counts[0] == 0 || counts[1] == 0;
            const bool depth_ok = max_depth_ < 0 || task.depth < max_depth_;
            if (pure || !depth_ok || n < 2 * min_leaf_) continue;

            const auto split = find_split(task.begin, task.end);
            if (!split.found) continue;

            const double* col = data_.column(static_cast<std::size_t>(split.feature));
            const auto mid = std::partition(
                samples_.begin() + static_cast<std::ptrdiff_t>(task.begin),
                samples_.begin() + static_cast<std::ptrdiff_t>(task.end),
                [&](std::uint32_t s) { return col[s] <= split.threshold; });
            const auto mid_pos = static_cast<std::size_t>(mid - samples_.begin());

            const auto left = static_cast<std::int32_t>(nodes_.size());
            const auto right = left + 1;
            {
                auto& parent = nodes_[static_cast<std::size_t>(task.node)];
                parent.feature = split.feature;
                parent.threshold = split.threshold;
                parent.left = left;
                parent.right = right;
            }
            nodes_.emplace_back();
            nodes_.emplace_back();
            stack.push_back({right, mid_pos, task.end, task.depth + 1});
            stack.push_back({left, task.begin, mid_pos, task.depth + 1});
        }
        return std::move(nodes_);
    }

private:
    struct Split {
        bool found = false;
        std::int32_t feature = -1;
        double threshold = 0.0;
        Wide num = 0;  // score = num / den, larger is purer
        Wide den = 1;
    };

    struct Entry {
        double value;
        std::uint8_t label;
    };

    Split find_split(std::size_t begin, std::size_t end) {
        std::iota(feature_order_.begin(), feature_order_.end(), 0);
        if (shuffle_features_) rng_.shuffle(std::span<std::int32_t>(feature_order_));

        Split best;
        std::size_t evaluated = 0;
        const std::size_t n = end - begin;
        std::array<std::uint64_t, 2> total{};
        for (std::size_t i = begin; i < end; ++i) ++total[labels_[samples_[i]]];

        for (const std::int32_t f : feature_order_) {
            if (evaluated >= features_per_split_ && best.found) break;
            const double* col = data_.column(static_cast<std::size_t>(f));
            buffer_.resize(n);
            double lo = col[samples_[begin]];
            double hi = lo;
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint32_t s = samples_[begin + i];
                const double v = col[s];
                buffer_[i] = {v, labels_[s]};
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (lo == hi) continue;  // constant in this node; does not count
            ++evaluated;
            std::sort(buffer_.begin(), buffer_.end(),
                      [](const Entry& a, const Entry& b) { return a.value < b.value; });

            std::array<std::uint64_t, 2> left{};
            for (std::size_t i = 0; i + 1 < n; ++i) {
                ++left[buffer_[i].label];
                if (buffer_[i].value == buffer_[i + 1].value) continue;
                const std::uint64_t nl = i + 1;
                const std::uint64_t nr = n - nl;
                if (nl < min_leaf_ || nr < min_leaf_) continue;
                const std::uint64_t r0 = total[0] - left[0];
                const std::uint64_t r1 = total[1] - left[1];
                const Wide sl = Wide(left[0]) * left[0] + Wide(left[1]) * left[1];
                const Wide sr = Wide(r0) * r0 + Wide(r1) * r1;
                const Wide num = sl * nr + sr * nl;
                const Wide den = Wide(nl) * nr;
                bool better = false;
                if (!best.found) {
                    better = true;
                } else {
                    const Wide lhs = num * best.den;
                    const Wide rhs = best.num * den;
                    better = lhs > rhs || (lhs == rhs && f < best.feature);
                }
                if (better) {
                    const double a = buffer_[i].value;
                    const double b = buffer_[i + 1].value;
                    double t = a / 2 + b / 2;
                    if (!(t < b) || !std::isfinite(t)) t = a;
                    best = {true, f, t, num, den};
                }
            }
        }
        return best;
    }

    const ColumnData& data_;
    const std::vector<std::uint8_t>& labels_;
    int max_depth_;
    std::size_t min_leaf_;
    std::size_t features_per_split_;
    bool shuffle_features_;
    Rng rng_;
    std::vector<std::int32_t> feature_order_;
    std::vector<std::uint32_t> samples_;
    std::vector<TreeNode> nodes_;
    std::vector<Entry> buffer_;
};

std::vector<std::uint8_t> to_bytes(std::span<const int> labels) {
    return std::vector<std::uint8_t>(labels.begin(), labels.end());
}

json tree_to_json(const TreeModel& model) {
    json nodes = json::array();
    for (const auto& n : model.nodes()) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.predicted, n.class_counts[0],
                         n.class_counts[1]});
    }
    return {{"format", "nidsllm-tree"}, {"version", 1}, {"columns", model.columns()},
            {"nodes", std::move(nodes)}};
}

TreeModel tree_from_json(const json& j) {
    if (!j.is_object() || j.value("format", std::string()) != "nidsllm-tree" || j.value("version", 0) != 1)
        throw DataError("not a version-1 nidsllm tree model");
    std::vector<TreeNode> nodes;
    for (const auto& a : j.at("nodes")) {
        TreeNode n;
        n.feature = a.at(0).get<std::int32_t>();
        n.threshold = a.at(1).get<double>();
        n.left = a.at(2).get<std::int32_t>();
        n.right = a.at(3).get<std::int32_t>();
        n.predicted = a.at(4).get<std::int32_t>();
        n.class_counts = {a.at(5).get<std::uint64_t>(), a.at(6).get<std::uint64_t>()};
        nodes.push_back(n);
    }
    return TreeModel(std::move(nodes), j.at("columns").get<std::vector<std::string>>());
}

json forest_to_json(const ForestModel& model) {
    json trees = json::array();
    for (const auto& t : model.trees()) trees.push_back(tree_to_json(t).at("nodes"));
    return {{"format", "nidsllm-forest"}, {"version", 1}, {"columns", model.columns()},
            {"vote_rule", "majority"}, {"trees", std::move(trees)}};
}

ForestModel forest_from_json(const json& j) {
    if (!j.is_object() || j.value("format", std::string()) != "nidsllm-forest" || j.value("version", 0) != 1)
        throw DataError("not a version-1 nidsllm forest model");
    const auto columns = j.at("columns").get<std::vector<std::string>>();
    std::vector<TreeModel> trees;
    for (const auto& nodes : j.at("trees")) {
        json tj = {{"format", "nidsllm-tree"}, {"version", 1}, {"columns", columns},
                   {"nodes", nodes}};
        trees.push_back(tree_from_json(tj));
    }
    return ForestModel(std::move(trees), columns);
}

}  // namespace

std::string_view non_numeric_policy_name(NonNumericPolicy policy) {
    return policy == NonNumericPolicy::drop ? "drop" : "frequency";
}

NonNumericPolicy parse_non_numeric_policy(std::string_view name) {
    if (name == "drop") return NonNumericPolicy::drop;
    if (name == "frequency") return NonNumericPolicy::frequency;
    throw ConfigError("unknown non-numeric policy '" + std::string(name) + "'");
}

bool is_missing_value(std::string_view raw) {
    while (!raw.empty() && raw.front() == ' ') raw.remove_prefix(1);
    while (!raw.empty() && raw.back() == ' ') raw.remove_suffix(1);
    if (raw.empty()) return true;
    const auto l = lower(raw);
    return l == "nan" || l == "na" || l == "null";
}

FeatureEncoder FeatureEncoder::fit(const FlowTable& table, NumericizeOptions options) {
    if (table.empty()) throw ArgumentError("cannot fit an encoder on an empty table");
    FeatureEncoder enc;
    const auto& names = table.schema().feature_names;
    for (std::size_t c = 0; c < names.size(); ++c) {
        std::vector<double> parsed;
        parsed.reserve(table.size());
        bool numeric = true;
        for (const auto& row : table) {
            const auto raw = row.value(c);
            if (is_missing_value(raw)) continue;
            auto v = parse_number(raw);
            if (!v) {
                numeric = false;
                break;
            }
            parsed.push_back(*v);
        }
        Column col;
        col.name = names[c];
        if (numeric) {
            col.kind = ColumnKind::numeric;
            col.median = median_of(std::move(parsed));
        } else if (options.non_numeric == NonNumericPolicy::frequency) {
            col.kind = ColumnKind::frequency;
            std::map<std::string, std::size_t> counts;
            for (const auto& row : table) ++counts[std::string(row.value(c))];
            for (const auto& [value, count] : counts)
                col.frequency[value] =
                    static_cast<double>(count) / static_cast<double>(table.size());
        } else {
            continue;
        }
        enc.columns_.push_back(std::move(col));
    }
    if (enc.columns_.empty())
        throw ConfigError("numericize: every column was dropped; nothing left to train on");
    return enc;
}

std::vector<std::string> FeatureEncoder::column_names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

NumericMatrix FeatureEncoder::transform(const FlowTable& table) const {
    NumericMatrix m;
    m.rows = table.size();
    m.cols = columns_.size();
    m.column_names = column_names();
    m.values.resize(m.rows * m.cols);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        const auto idx = table.schema().index_of(col.name);
        if (!idx) throw SchemaError("table lacks encoder column '" + col.name + "'");
        for (std::size_t r = 0; r < table.size(); ++r) {
            const auto raw = table[r].value(*idx);
            double v;
            if (col.kind == ColumnKind::numeric) {
                auto parsed = is_missing_value(raw) ? std::nullopt : parse_number(raw);
                v = parsed ? *parsed : col.median;
            } else {
                auto it = col.frequency.find(std::string(raw));
                v = it == col.frequency.end() ? 0.0 : it->second;
            }
            m.values[r * m.cols + c] = v;
        }
    }
    return m;
}

std::string FeatureEncoder::to_json() const {
    json cols = json::array();
    for (const auto& c : columns_) {
        json jc = {{"name", c.name},
                   {"kind", c.kind == ColumnKind::numeric ? "numeric" : "frequency"},
                   {"median", c.median}};
        if (c.kind == ColumnKind::frequency) jc["frequency"] = c.frequency;
        cols.push_back(std::move(jc));
    }
    return json{{"format", "nidsllm-encoder"}, {"version", 1}, {"columns", std::move(cols)}}
        .dump();
}

FeatureEncoder FeatureEncoder::from_json(std::string_view text) {
    const auto j = json::parse(text);
    if (!j.is_object() || j.value("format", std::string()) != "nidsllm-encoder")
        throw DataError("not an nidsllm encoder");
    FeatureEncoder enc;
    for (const auto& jc : j.at("columns")) {
        Column c;
        c.name = jc.at("name").get<std::string>();
        c.kind = jc.at("kind").get<std::string>() == "numeric" ? ColumnKind::numeric
                                                               : ColumnKind::frequency;
        c.median = jc.value("median", 0.0);
        if (jc.contains("frequency"))
            c.frequency = jc["frequency"].get<std::map<std::string, double>>();
        enc.columns_.push_back(std::move(c));
    }
    return enc;
}

NumericMatrix numericize(const FlowTable& table, NumericizeOptions options) {
    return FeatureEncoder::fit(table, options).transform(table);
}

TreeModel::TreeModel(std::vector<TreeNode> nodes, std::vector<std::string> columns)
    : nodes_(std::move(nodes)), columns_(std::move(columns)) {
    if (nodes_.empty()) throw ArgumentError("a tree needs at least one node");
    const auto n = static_cast<std::int32_t>(nodes_.size());
    for (const auto& node : nodes_) {
        if (node.is_leaf()) continue;
        if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n ||
            node.feature >= static_cast<std::int32_t>(columns_.size()) ||
            !std::isfinite(node.threshold))
            throw DataError("malformed tree node");
    }
}

int TreeModel::predict_row(std::span<const double> x) const {
    const TreeNode* node = &nodes_[0];
    while (node->feature >= 0)
        node = &nodes_[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] >
                                                        node->threshold
                                                    ? node->right
                                                    : node->left)];
    return node->predicted;
}

std::size_t TreeModel::count_nodes_by_traversal() const {
    std::size_t count = 0;
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const auto& node = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        ++count;
        if (!node.is_leaf()) {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return count;
}

int TreeModel::depth() const {
    int deepest = 0;
    std::vector<std::pair<std::int32_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        const auto& node = nodes_[static_cast<std::size_t>(i)];
        if (node.is_leaf()) {
            deepest = std::max(deepest, d);
        } else {
            stack.push_back({node.left, d + 1});
            stack.push_back({node.right, d + 1});
        }
    }
    return deepest;
}

ForestModel::ForestModel(std::vector<TreeModel> trees, std::vector<std::string> columns)
    : trees_(std::move(trees)), columns_(std::move(columns)) {
    if (trees_.empty()) throw ArgumentError("a forest needs at least one tree");
}

int ForestModel::predict_row(std::span<const double> x) const {
    std::size_t malicious = 0;
    for (const auto& t : trees_) malicious += static_cast<std::size_t>(t.predict_row(x));
    return 2 * malicious > trees_.size() ? 1 : 0;
}

std::size_t ForestModel::node_count() const {
    std::size_t total = 0;
    for (const auto& t : trees_) total += t.node_count();
    return total;
}

TreeModel train_decision_tree(const NumericMatrix& data, std::span<const int> labels,
                              const TreeParams& params) {
    check_training_input(data, labels);
    const ColumnData columns(data);
    const auto label_bytes = to_bytes(labels);
    TreeBuilder builder(columns, label_bytes, params.max_depth, params.min_leaf, data.cols, false,
                        params.seed);
    std::vector<std::uint32_t> samples(data.rows);
    std::iota(samples.begin(), samples.end(), 0u);
    return TreeModel(builder.build(std::move(samples)), data.column_names);
}

ForestModel train_random_forest(const NumericMatrix& data, std::span<const int> labels,
                                const ForestParams& params) {
    check_training_input(data, labels);
    if (params.n_trees == 0) throw ArgumentError("n_trees must be at least 1");
    const ColumnData columns(data);
    const auto label_bytes = to_bytes(labels);
    const std::size_t per_split =
        params.feature_subsample > 0
            ? params.feature_subsample
            : std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::floor(std::sqrt(static_cast<double>(data.cols)))));

    std::vector<std::vector<TreeNode>> grown(params.n_trees);
    auto grow = [&](std::size_t t) {
        Rng rng(Rng::derive(params.seed, t));
        std::vector<std::uint32_t> samples(data.rows);
        if (params.bootstrap) {
            for (auto& s : samples) s = static_cast<std::uint32_t>(rng.below(data.rows));
        } else {
            std::iota(samples.begin(), samples.end(), 0u);
        }
        TreeBuilder builder(columns, label_bytes, params.max_depth, params.min_leaf, per_split,
                            true, rng.next());
        grown[t] = builder.build(std::move(samples));
    };

    unsigned workers = params.workers ? params.workers : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(params.n_trees));
    if (workers == 1) {
        for (std::size_t t = 0; t < params.n_trees; ++t) grow(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t t; (t = next.fetch_add(1)) < params.n_trees;) {
                        try {
                            grow(t);
                        } catch (...) {
                            std::lock_guard lock(error_mutex);
                            if (!error) error = std::current_exception();
                            return;
                        }
                    }
                });
            }
        }
        if (error) std::rethrow_exception(error);
    }

    std::vector<TreeModel> trees;
    trees.reserve(grown.size());
    for (auto& nodes : grown) trees.emplace_back(std::move(nodes), data.column_names);
    return ForestModel(std::move(trees), data.column_names);
}

std::vector<int> predict(const TreeModel& model, const NumericMatrix& data) {
    check_columns(model.columns(), data);
    std::vector<int> out(data.rows);
    for (std::size_t r = 0; r < data.rows; ++r) out[r] = model.predict_row(data.row(r));
    return out;
}

std::vector<int> predict(const ForestModel& model, const NumericMatrix& data) {
    check_columns(model.columns(), data);
    std::vector<int> out(data.rows);
    for (std::size_t r = 0; r < data.rows; ++r) out[r] = model.predict_row(data.row(r));
    return out;
}

std::string serialize(const TreeModel& model) { return tree_to_json(model).dump(); }
std::string serialize(const ForestModel& model) { return forest_to_json(model).dump(); }
TreeModel parse_tree_model(std::string_view text) {
    try {
        return tree_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed tree model: ") + e.what());
    }
}

ForestModel parse_forest_model(std::string_view text) {
    try {
        return forest_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed forest model: ") + e.what());
    }
}

std::string BaselineModel::kind() const {
    return std::holds_alternative<TreeModel>(model) ? "dt" : "rf";
}

std::size_t BaselineModel::node_count() const {
    return std::visit([](const auto& m) { return m.node_count(); }, model);
}

std::vector<int> BaselineModel::predict(const NumericMatrix& data) const {
    return std::visit([&](const auto& m) { return nidsllm::predict(m, data); }, model);
}

std::vector<int> BaselineModel::predict(const FlowTable& table) const {
    return predict(encoder.transform(table));
}

void save_baseline(const BaselineModel& model, const std::filesystem::path& path) {
    json j = {{"format", "nidsllm-baseline"},
              {"version", 1},
              {"kind", model.kind()},
              {"node_count", model.node_count()},
              {"encoder", json::parse(model.encoder.to_json())}};
    j["model"] = std::visit(
        [](const auto& m) {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, TreeModel>)
                return tree_to_json(m);
            else
                return forest_to_json(m);
        },
        model.model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model " + path.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing model " + path.string());
}

BaselineModel load_baseline(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read model " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", std::string()) != "nidsllm-baseline")
        throw DataError(path.string() + " is not an nidsllm baseline model");
    BaselineModel model;
    try {
        model.encoder = FeatureEncoder::from_json(j.at("encoder").dump());
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "dt")
            model.model = tree_from_json(j.at("model"));
        else if (kind == "rf")
            model.model = forest_from_json(j.at("model"));
        else
            throw DataError(path.string() + ": unknown model kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed model: " + e.what());
    }
    return model;
}

}  // namespace nidsllm
