#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nidsllm/llm_backend.hpp"
#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"
#include "nidsllm/registry.hpp"

namespace nidsllm {

enum class Cell { tp, fp, tn, fn };
inline constexpr Cell kAllCells[] = {Cell::tp, Cell::fp, Cell::tn, Cell::fn};
std::string_view cell_name(Cell cell);  // "TP", "FP", "TN", "FN"
Cell cell_of(int label, int verdict);

struct Exemplar {
    FlowRecord record;
    Verdict verdict;
    std::size_t position = 0;  // row in the classified table
};

struct ExemplarSet {
    std::map<Cell, std::vector<Exemplar>> cells;  // every cell present, possibly empty
    std::map<Cell, std::size_t> available;        // samples of each kind before sampling
    std::size_t n_per_cell = 0;
    std::uint64_t seed = 0;

    std::size_t size() const;
};

// Seeded uniform sample of up to n_per_cell rows per cell; parse failures are
// skipped. Each cell keeps table order.
ExemplarSet select_exemplars(std::span<const VerdictResult> verdicts, const FlowTable& table,
                             std::size_t n_per_cell, std::uint64_t seed);

enum class ClaimKind { protocol_name, port_service, field_value, location, range_judgement, other };
std::string_view claim_kind_name(ClaimKind kind);

enum class Layer { none, l4, l7 };

struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    bool operator==(const TextSpan&) const = default;
};

struct Claim {
    ClaimKind kind = ClaimKind::other;
    std::string subject_field;  // schema feature, or empty
    std::string asserted;       // short normalized statement
    TextSpan span;              // into the explanation text
    std::string excerpt;        // text at span
    std::vector<std::string> numbers;  // numeric tokens taken verbatim from the span

    // protocol_name: number + name at `layer`; port_service: port + service
    // (empty when only the port value is stated); field_value: value.
    std::optional<std::uint32_t> number;
    std::string name;
    std::string value;
    Layer layer = Layer::none;

    bool operator==(const Claim&) const = default;
};

// Rule-based decomposition; sentences no rule matches become `other` claims.
// Feature names come from `schema`, service and protocol names from `registry`.
std::vector<Claim> extract_claims(std::string_view text, const DatasetSchema& schema,
                                  const ProtocolRegistry& registry);
std::vector<Claim> extract_claims(std::string_view text);

enum class FindingStatus { supported, contradicted_by_flow, contradicted_by_registry, unverifiable };
std::string_view finding_status_name(FindingStatus status);

struct FactCheckFinding {
    Claim claim;
    FindingStatus status = FindingStatus::unverifiable;
    std::string evidence;
    std::vector<std::string> notes;  // e.g. layer confusion, port 0
};

FactCheckFinding check_claim(const Claim& claim, const FlowRecord& record,
                             const ProtocolRegistry& registry);
std::vector<FactCheckFinding> fact_check(std::span<const Claim> claims, const FlowRecord& record,
                                         const ProtocolRegistry& registry);

struct ExplanationRecord {
    Exemplar exemplar;
    Cell cell = Cell::tn;
    std::string explanation_text;
    std::vector<Claim> claims;
    bool empty_response = false;
    std::string error;  // set when the backend call failed
};

std::vector<FactCheckFinding> fact_check(const ExplanationRecord& explanation,
                                         const ProtocolRegistry& registry);

// One request per exemplar; failures are recorded on the record and the
// remaining exemplars still run.
std::vector<ExplanationRecord> generate_explanations(ChatBackend& backend,
                                                     const ExemplarSet& exemplars,
                                                     const PromptTemplate& tmpl,
                                                     const std::string& model_id,
                                                     const ProtocolRegistry& registry, int workers = 1);
std::vector<ExplanationRecord> generate_explanations(const BackendConfig& config,
                                                     const ExemplarSet& exemplars,
                                                     const PromptTemplate& tmpl,
                                                     const std::string& model_id);

ChatRequest explanation_request(const Exemplar& exemplar, const PromptTemplate& tmpl,
                                const std::string& model_id);

// contradicted / (supported + contradicted); nullopt when nothing was decided.
std::optional<double> hallucination_rate(std::span<const FactCheckFinding> findings);

struct CheckedExplanation {
    ExplanationRecord record;
    std::vector<FactCheckFinding> findings;
};

struct CellDigest {
    std::size_t available = 0;
    std::size_t explanations = 0;
    std::size_t claims = 0;
    std::map<FindingStatus, std::size_t> by_status;
    std::optional<double> hallucination_rate;
};

struct ExplanationReport {
    std::string model_id;
    std::string template_version;
    std::string registry_version;
    std::uint64_t seed = 0;
    std::size_t n_per_cell = 0;
    std::vector<CheckedExplanation> explanations;
    std::map<Cell, CellDigest> cells;
    CellDigest overall;
};

ExplanationReport build_explanation_report(const ExemplarSet& exemplars,
                                           std::vector<ExplanationRecord> records,
                                           const ProtocolRegistry& registry,
                                           std::string model_id, std::string template_version);

std::string to_json(const ExplanationReport& report);
std::string to_text(const ExplanationReport& report);
// Writes `<stem>.json` and `<stem>.txt`.
void write_explanation_report(const ExplanationReport& report, const std::filesystem::path& stem);

}  // namespace nidsllm
