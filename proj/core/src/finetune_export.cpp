#include "nidsllm/finetune_export.hpp"

#include <fstream>
#include <unordered_map>

#include "json.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/rng.hpp"

namespace nidsllm {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string label_token(int label) { return label == 1 ? "1" : "0"; }

std::string classification_prompt_text(const FlowRecord& record, const PromptTemplate& tmpl) {
    const auto messages = build_classification_prompt(tmpl, encode_flow(record));
    return render_prompt_text(messages);
}

std::vector<std::size_t> sample_budget(const FlowTable& train, std::size_t budget,
                                       std::uint64_t seed, BudgetSampling sampling) {
    if (budget == 0) throw ArgumentError("corpus budget must be positive");
    if (budget > train.size())
        throw ArgumentError("corpus budget " + std::to_string(budget) + " exceeds " +
                            std::to_string(train.size()) + " training rows");
    auto picked = subsample_indices(train, budget, sampling == BudgetSampling::stratified,
                                    Rng::derive(seed, 0));
    // Presentation order is seeded too, so trainers see mixed classes.
    Rng order(Rng::derive(seed, 1));
    order.shuffle(std::span<std::size_t>(picked));
    return picked;
}

std::unordered_map<std::size_t, const FlowRecord*> index_by_source_row(const FlowTable& source) {
    std::unordered_map<std::size_t, const FlowRecord*> index;
    index.reserve(source.size());
    for (const auto& row : source) index.emplace(row.source_row(), &row);
    return index;
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_manifest(const CorpusManifest& m, const std::filesystem::path& corpus_path) {
    ordered_json j;
    j["format"] = "nidsllm-corpus-manifest";
    j["version"] = 1;
    j["dataset_id"] = m.dataset_id;
    j["method"] = std::string(corpus_method_name(m.method));
    j["budget"] = m.budget;
    j["seed"] = m.seed;
    j["sampling"] = std::string(budget_sampling_name(m.sampling));
    j["template_version"] = m.template_version;
    j["label_counts"] = m.label_counts;
    j["attack_counts"] = m.attack_counts;
    if (m.method == CorpusMethod::kto) {
        j["relevant"] = m.relevant;
        j["irrelevant"] = m.irrelevant;
    }
    if (!m.config_digest.empty()) j["config_digest"] = m.config_digest;
    j["source_rows"] = m.source_rows;
    const auto path = manifest_path(corpus_path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<ordered_json> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            rows.push_back(ordered_json::parse(line));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ": line " + std::to_string(n) + ": " + e.what());
        }
    }
    return rows;
}

template <typename Row>
CorpusManifest describe(std::span<const Row> rows, const FlowTable& source, CorpusManifest base) {
    const auto index = index_by_source_row(source);
    base.budget = rows.size();
    base.label_counts.clear();
    base.attack_counts.clear();
    base.source_rows.clear();
    for (const auto& row : rows) {
        auto it = index.find(row.source_row);
        if (it == index.end())
            throw ArgumentError("corpus row references unknown source row " +
                                std::to_string(row.source_row));
        ++base.label_counts[label_token(it->second->label())];
        ++base.attack_counts[it->second->attack_type()];
        base.source_rows.push_back(row.source_row);
    }
    return base;
}

}  // namespace

std::string_view corpus_method_name(CorpusMethod method) {
    return method == CorpusMethod::orpo ? "orpo" : "kto";
}

CorpusMethod parse_corpus_method(std::string_view name) {
    if (name == "orpo") return CorpusMethod::orpo;
    if (name == "kto") return CorpusMethod::kto;
    throw ConfigError("unknown fine-tuning method '" + std::string(name) + "'");
}

std::string_view budget_sampling_name(BudgetSampling sampling) {
    return sampling == BudgetSampling::stratified ? "stratified" : "uniform";
}

BudgetSampling parse_budget_sampling(std::string_view name) {
    if (name == "stratified") return BudgetSampling::stratified;
    if (name == "uniform") return BudgetSampling::uniform;
    throw ConfigError("unknown budget sampling '" + std::string(name) + "'");
}

std::vector<PreferencePair> build_orpo_pairs(const FlowTable& train, const PromptTemplate& tmpl,
                                             std::size_t budget, std::uint64_t seed,
                                             BudgetSampling sampling) {
    const auto picked = sample_budget(train, budget, seed, sampling);
    std::vector<PreferencePair> pairs;
    pairs.reserve(picked.size());
    for (auto p : picked) {
        const auto& row = train[p];
        pairs.push_back({classification_prompt_text(row, tmpl), label_token(row.label()),
                         label_token(1 - row.label()), row.source_row()});
    }
    return pairs;
}

std::vector<KtoExample> build_kto_examples(const FlowTable& train, const PromptTemplate& tmpl,
                                           std::size_t budget, std::uint64_t seed,
                                           BudgetSampling sampling) {
    if (budget < 2) throw ArgumentError("KTO corpora need a budget of at least 2");
    auto picked = sample_budget(train, budget, seed, sampling);
    const std::size_t relevant = (budget + 1) / 2;

    // Which sampled records are relevant is an independent seeded draw.
    std::vector<char> is_relevant(picked.size(), 0);
    std::vector<std::size_t> slots(picked.size());
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    Rng draw(Rng::derive(seed, 2));
    draw.shuffle(std::span<std::size_t>(slots));
    for (std::size_t i = 0; i < relevant; ++i) is_relevant[slots[i]] = 1;

    std::vector<KtoExample> examples;
    examples.reserve(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
        const auto& row = train[picked[i]];
        const bool rel = is_relevant[i] != 0;
        examples.push_back({classification_prompt_text(row, tmpl),
                            label_token(rel ? row.label() : 1 - row.label()), rel,
                            row.source_row()});
    }
    return examples;
}

CorpusManifest describe_corpus(std::span<const PreferencePair> pairs, const FlowTable& source,
                               CorpusManifest base) {
    base.method = CorpusMethod::orpo;
    base.relevant = base.irrelevant = 0;
    return describe(pairs, source, std::move(base));
}

CorpusManifest describe_corpus(std::span<const KtoExample> examples, const FlowTable& source,
                               CorpusManifest base) {
    base.method = CorpusMethod::kto;
    base.relevant = base.irrelevant = 0;
    for (const auto& e : examples) (e.relevant ? base.relevant : base.irrelevant)++;
    return describe(examples, source, std::move(base));
}

std::filesystem::path manifest_path(const std::filesystem::path& corpus_path) {
    auto p = corpus_path;
    p += ".manifest.json";
    return p;
}

void export_jsonl(std::span<const PreferencePair> pairs, const CorpusManifest& manifest,
                  const std::filesystem::path& path) {
    if (manifest.method != CorpusMethod::orpo)
        throw ArgumentError("ORPO rows exported with a non-ORPO manifest");
    std::vector<std::string> lines;
    lines.reserve(pairs.size());
    for (const auto& p : pairs) {
        ordered_json j;
        j["prompt"] = p.prompt;
        j["chosen"] = p.accepted;
        j["rejected"] = p.rejected;
        lines.push_back(j.dump());
    }
    write_lines(lines, path);
    write_manifest(manifest, path);
}

void export_jsonl(std::span<const KtoExample> examples, const CorpusManifest& manifest,
                  const std::filesystem::path& path) {
    if (manifest.method != CorpusMethod::kto)
        throw ArgumentError("KTO rows exported with a non-KTO manifest");
    std::vector<std::string> lines;
    lines.reserve(examples.size());
    for (const auto& e : examples) {
        ordered_json j;
        j["prompt"] = e.prompt;
        j["completion"] = e.response;
        j["label"] = e.relevant;
        lines.push_back(j.dump());
    }
    write_lines(lines, path);
    write_manifest(manifest, path);
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read manifest " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    CorpusManifest m;
    m.dataset_id = j.value("dataset_id", std::string());
    m.method = parse_corpus_method(j.at("method").get<std::string>());
    m.budget = j.at("budget").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.sampling = parse_budget_sampling(j.value("sampling", std::string("stratified")));
    m.template_version = j.value("template_version", std::string());
    m.label_counts = j.value("label_counts", std::map<std::string, std::size_t>{});
    m.attack_counts = j.value("attack_counts", std::map<std::string, std::size_t>{});
    m.relevant = j.value("relevant", std::size_t{0});
    m.irrelevant = j.value("irrelevant", std::size_t{0});
    m.source_rows = j.at("source_rows").get<std::vector<std::size_t>>();
    m.config_digest = j.value("config_digest", std::string());
    return m;
}

std::vector<PreferencePair> read_orpo_jsonl(const std::filesystem::path& path) {
    const auto manifest = read_manifest(manifest_path(path));
    const auto rows = read_jsonl(path);
    if (rows.size() != manifest.source_rows.size())
        throw DataError(path.string() + ": row count does not match manifest");
    std::vector<PreferencePair> pairs;
    pairs.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        pairs.push_back({rows[i].at("prompt").get<std::string>(),
                         rows[i].at("chosen").get<std::string>(),
                         rows[i].at("rejected").get<std::string>(), manifest.source_rows[i]});
    return pairs;
}

std::vector<KtoExample> read_kto_jsonl(const std::filesystem::path& path) {
    const auto manifest = read_manifest(manifest_path(path));
    const auto rows = read_jsonl(path);
    if (rows.size() != manifest.source_rows.size())
        throw DataError(path.string() + ": row count does not match manifest");
    std::vector<KtoExample> examples;
    examples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        examples.push_back({rows[i].at("prompt").get<std::string>(),
                            rows[i].at("completion").get<std::string>(),
                            rows[i].at("label").get<bool>(), manifest.source_rows[i]});
    return examples;
}

CorpusAudit audit_corpus(std::span<const PreferencePair> pairs, const FlowTable& source) {
    const auto index = index_by_source_row(source);
    CorpusAudit audit;
    for (const auto& p : pairs) {
        ++audit.rows;
        auto it = index.find(p.source_row);
        if (it == index.end()) {
            ++audit.label_mismatches;
            continue;
        }
        const auto& rec = *it->second;
        const bool tokens_ok = (p.accepted == "0" || p.accepted == "1") &&
                               (p.rejected == "0" || p.rejected == "1") &&
                               p.accepted != p.rejected;
        if (!tokens_ok) ++audit.structural_errors;
        if (p.accepted != label_token(rec.label())) ++audit.label_mismatches;
        if (p.prompt.find(encode_flow(rec)) == std::string::npos) ++audit.prompt_mismatches;
    }
    return audit;
}

CorpusAudit audit_corpus(std::span<const KtoExample> examples, const FlowTable& source) {
    const auto index = index_by_source_row(source);
    CorpusAudit audit;
    for (const auto& e : examples) {
        ++audit.rows;
        auto it = index.find(e.source_row);
        if (it == index.end()) {
            ++audit.label_mismatches;
            continue;
        }
        const auto& rec = *it->second;
        if (e.response != "0" && e.response != "1") {
            ++audit.structural_errors;
            continue;
        }
        // Recovered label: completion XOR (not relevant).
        const int completion = e.response == "1" ? 1 : 0;
        const int recovered = e.relevant ? completion : 1 - completion;
        if (recovered != rec.label()) ++audit.label_mismatches;
        if (e.prompt.find(encode_flow(rec)) == std::string::npos) ++audit.prompt_mismatches;
    }
    return audit;
}

CorpusAudit audit_export(const std::filesystem::path& path, const FlowTable& source) {
    const auto manifest = read_manifest(manifest_path(path));
    if (manifest.method == CorpusMethod::orpo) {
        const auto pairs = read_orpo_jsonl(path);
        return audit_corpus(pairs, source);
    }
    const auto examples = read_kto_jsonl(path);
    return audit_corpus(examples, source);
}

}  // namespace nidsllm
