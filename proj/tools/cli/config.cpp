#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "nidsllm/digest.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"
#include "nidsllm/rng.hpp"

namespace nidsllm::cli {

namespace {

using Table = std::map<std::string, std::map<std::string, std::string>>;

const Table& default_table() {
    static const Table table = {
        {"dataset",
         {{"path", ""},
          {"schema", std::string(kUnswNb15V2)},
          {"exclude", ""},
          {"subsample", "0"},
          {"subsample_stratified", "true"},
          {"train_path", ""},
          {"test_path", ""}}},
        {"split", {{"test_fraction", "0.05"}, {"stratify_by", ""}}},
        {"backend",
         {{"kind", "mock"},
          {"model_id", "unspecified"},
          {"endpoint_url", ""},
          {"auth_token_env", ""},
          {"retry_limit", "3"},
          {"timeout_ms", "60000"},
          {"backoff_ms", "1000"},
          {"mock_rule", "always:0"},
          {"transcript", ""},
          {"record_transcript", ""},
          {"injected_delay_us", "0"},
          {"max_in_flight", "4"},
          {"workers", "1"}}},
        {"prompt",
         {{"template", std::string(kClassifyTemplateId)},
          {"explain_template", std::string(kExplainTemplateId)}}},
        {"classify", {{"cv_folds", "0"}}},
        {"finetune", {{"method", "orpo"}, {"budgets", "1000"}, {"sampling", "stratified"}}},
        {"baseline",
         {{"kind", "rf"},
          {"n_trees", "100"},
          {"max_depth", "-1"},
          {"min_leaf", "1"},
          {"feature_subsample", "0"},
          {"bootstrap", "true"},
          {"non_numeric", "drop"},
          {"workers", "0"}}},
        {"bench",
         {{"subjects", "dt,rf,mock-llm"},
          {"runs", "10"},
          {"warmup", "1"},
          {"batch_size", "0"},
          {"concurrent", "false"},
          {"dt_model", ""},
          {"rf_model", ""},
          {"mock_delay_us", "14000"},
          {"llm_parameters", "8030000000"}}},
        {"explain", {{"n_per_cell", "1"}, {"registry", ""}, {"predictions", ""}}},
        {"run", {{"out", "."}}},
    };
    return table;
}

// Seeds are filled from run.seed in this order; the position is the stream.
const std::vector<std::string>& seed_sections() {
    static const std::vector<std::string> sections = {"dataset", "split",  "classify",
                                                      "finetune", "baseline", "explain"};
    return sections;
}

bool known_key(const std::string& section, const std::string& key) {
    if (key == "seed")
        return section == "run" ||
               std::find(seed_sections().begin(), seed_sections().end(), section) !=
                   seed_sections().end();
    auto it = default_table().find(section);
    return it != default_table().end() && it->second.contains(key);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_builtin_schema(const std::string& v) {
    const auto ids = builtin_schema_ids();
    return std::find(ids.begin(), ids.end(), v) != ids.end();
}

bool is_builtin_template(const std::string& v) {
    return v == kClassifyTemplateId || v == kExplainTemplateId;
}

std::string absolutize(const std::string& section, const std::string& key, std::string value,
                       const std::filesystem::path& base) {
    if (value.empty() || !is_path_key(section, key)) return value;
    if (section == "dataset" && key == "schema" && is_builtin_schema(value)) return value;
    if (section == "prompt" && is_builtin_template(value)) return value;
    std::filesystem::path p(value);
    if (p.is_relative()) p = base / p;
    return p.lexically_normal().string();
}

}  // namespace

bool is_path_key(const std::string& section, const std::string& key) {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"dataset", {"path", "train_path", "test_path", "schema"}},
        {"backend", {"transcript", "record_transcript"}},
        {"prompt", {"template", "explain_template"}},
        {"bench", {"dt_model", "rf_model"}},
        {"explain", {"registry", "predictions"}},
        {"run", {"out"}},
    };
    auto it = keys.find(section);
    return it != keys.end() &&
           std::find(it->second.begin(), it->second.end(), key) != it->second.end();
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.values_ = default_table();
    c.values_["run"]["out"] = std::filesystem::current_path().string();
    return c;
}

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir,
                           const std::string& source) {
    RunConfig c;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        const auto where = source + ":" + std::to_string(line_no);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!default_table().contains(section))
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
        if (section.empty()) throw ConfigError(where + ": key outside a section");
        const auto key = std::string(trim(line.substr(0, eq)));
        auto value = std::string(trim(line.substr(eq + 1)));
        if (!known_key(section, key))
            throw ConfigError(where + ": unknown key " + section + "." + key);
        c.values_[section][key] = absolutize(section, key, std::move(value), base_dir);
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    auto base = std::filesystem::absolute(path).parent_path();
    return parse(buf.str(), base, path.string());
}

void RunConfig::merge(const RunConfig& other) {
    for (const auto& [section, kv] : other.values_)
        for (const auto& [key, value] : kv) values_[section][key] = value;
}

void RunConfig::set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
        throw ConfigError("--set expects section.key=value, got '" + std::string(assignment) + "'");
    const auto section = std::string(trim(assignment.substr(0, dot)));
    const auto key = std::string(trim(assignment.substr(dot + 1, eq - dot - 1)));
    set(section, key, std::string(trim(assignment.substr(eq + 1))));
}

void RunConfig::set(const std::string& section, const std::string& key, std::string value) {
    if (!known_key(section, key)) throw ConfigError("unknown key " + section + "." + key);
    values_[section][key] =
        absolutize(section, key, std::move(value), std::filesystem::current_path());
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    auto it = values_.find(section);
    return it != values_.end() && it->second.contains(key) && !it->second.at(key).empty();
}

std::string RunConfig::str(const std::string& section, const std::string& key) const {
    auto it = values_.find(section);
    if (it != values_.end()) {
        auto kv = it->second.find(key);
        if (kv != it->second.end()) return kv->second;
    }
    return {};
}

std::int64_t RunConfig::integer(const std::string& section, const std::string& key) const {
    const auto v = str(section, key);
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(section + "." + key + " must be an integer, got '" + v + "'");
    return out;
}

std::uint64_t RunConfig::u64(const std::string& section, const std::string& key) const {
    const auto v = str(section, key);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(section + "." + key + " must be a non-negative integer, got '" + v + "'");
    return out;
}

double RunConfig::real(const std::string& section, const std::string& key) const {
    const auto v = str(section, key);
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError(section + "." + key + " must be a number, got '" + v + "'");
}

bool RunConfig::boolean(const std::string& section, const std::string& key) const {
    const auto v = str(section, key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(section + "." + key + " must be true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(str(section, key));
    std::string item;
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty()) out.emplace_back(t);
    return out;
}

std::map<std::string, std::uint64_t> RunConfig::resolve_seeds() {
    if (!has("run", "seed")) {
        std::random_device rd;
        const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        values_["run"]["seed"] = std::to_string(seed);
    }
    std::map<std::string, std::uint64_t> seeds;
    const auto run_seed = u64("run", "seed");
    seeds["run.seed"] = run_seed;
    for (std::size_t i = 0; i < seed_sections().size(); ++i) {
        const auto& section = seed_sections()[i];
        if (!has(section, "seed")) values_[section]["seed"] = std::to_string(Rng::derive(run_seed, i));
        seeds[section + ".seed"] = u64(section, "seed");
    }
    return seeds;
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& [section, kv] : values_) {
        if (!out.empty()) out += '\n';
        out += "[" + section + "]\n";
        for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
    }
    return out;
}

std::string RunConfig::digest() const {
    RunConfig copy = *this;
    copy.values_["run"].erase("out");
    return sha256_hex(copy.serialize());
}

std::filesystem::path RunConfig::out_dir() const { return str("run", "out"); }

}  // namespace nidsllm::cli
