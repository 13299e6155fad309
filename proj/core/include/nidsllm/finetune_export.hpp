#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"

namespace nidsllm {

// ORPO row: the true label is the accepted answer, its inverse the rejected one.
struct PreferencePair {
    std::string prompt;
    std::string accepted;
    std::string rejected;
    std::size_t source_row = 0;
};

// KTO row: `relevant` marks whether `response` is the true label.
struct KtoExample {
    std::string prompt;
    std::string response;
    bool relevant = false;
    std::size_t source_row = 0;
};

enum class CorpusMethod { orpo, kto };
std::string_view corpus_method_name(CorpusMethod method);
CorpusMethod parse_corpus_method(std::string_view name);

enum class BudgetSampling { stratified, uniform };
std::string_view budget_sampling_name(BudgetSampling sampling);
BudgetSampling parse_budget_sampling(std::string_view name);

struct CorpusManifest {
    std::string dataset_id;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    CorpusMethod method = CorpusMethod::orpo;
    std::string template_version;
    BudgetSampling sampling = BudgetSampling::stratified;
    std::map<std::string, std::size_t> label_counts;
    std::map<std::string, std::size_t> attack_counts;
    std::size_t relevant = 0;  // KTO only
    std::size_t irrelevant = 0;
    std::vector<std::size_t> source_rows;
    std::string config_digest;  // of the run that produced the corpus, when known
};

std::vector<PreferencePair> build_orpo_pairs(const FlowTable& train, const PromptTemplate& tmpl,
                                             std::size_t budget, std::uint64_t seed,
                                             BudgetSampling sampling = BudgetSampling::stratified);

// ceil(budget/2) relevant and floor(budget/2) irrelevant examples.
std::vector<KtoExample> build_kto_examples(const FlowTable& train, const PromptTemplate& tmpl,
                                           std::size_t budget, std::uint64_t seed,
                                           BudgetSampling sampling = BudgetSampling::stratified);

// Fills the count fields and source rows from the corpus and its source table.
CorpusManifest describe_corpus(std::span<const PreferencePair> pairs, const FlowTable& source,
                               CorpusManifest base);
CorpusManifest describe_corpus(std::span<const KtoExample> examples, const FlowTable& source,
                               CorpusManifest base);

// JSON Lines: ORPO {prompt, chosen, rejected}; KTO {prompt, completion, label}.
// The manifest goes to `<path>.manifest.json`.
void export_jsonl(std::span<const PreferencePair> pairs, const CorpusManifest& manifest,
                  const std::filesystem::path& path);
void export_jsonl(std::span<const KtoExample> examples, const CorpusManifest& manifest,
                  const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& corpus_path);
CorpusManifest read_manifest(const std::filesystem::path& path);

// Read back exported rows; source_row comes from the manifest sidecar.
std::vector<PreferencePair> read_orpo_jsonl(const std::filesystem::path& path);
std::vector<KtoExample> read_kto_jsonl(const std::filesystem::path& path);

struct CorpusAudit {
    std::size_t rows = 0;
    std::size_t label_mismatches = 0;
    std::size_t prompt_mismatches = 0;  // prompt does not contain the source flow text
    std::size_t structural_errors = 0;  // answer tokens outside {"0","1"} or equal

    bool ok() const noexcept {
        return label_mismatches == 0 && prompt_mismatches == 0 && structural_errors == 0;
    }
};

// Checks every row against its source record (matched by source_row).
CorpusAudit audit_corpus(std::span<const PreferencePair> pairs, const FlowTable& source);
CorpusAudit audit_corpus(std::span<const KtoExample> examples, const FlowTable& source);

// Reads an exported corpus plus manifest and audits it against `source`.
CorpusAudit audit_export(const std::filesystem::path& path, const FlowTable& source);

}  // namespace nidsllm
