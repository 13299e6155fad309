#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nidsllm/baselines.hpp"
#include "nidsllm/llm_backend.hpp"
#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"

namespace nidsllm {

// A binary prediction; nullopt marks a completion that did not parse.
using Prediction = std::optional<int>;

std::vector<Prediction> to_predictions(std::span<const VerdictResult> verdicts);
std::vector<Prediction> to_predictions(std::span<const int> values);

// Positive class is malicious (1).
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
    std::uint64_t parse_failures = 0;

    std::uint64_t evaluated() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Prediction> predictions, std::span<const int> labels);
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    // Set when the ratio was 0/0 and reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;

    bool operator==(const ClassMetrics&) const = default;
};

struct FoldStat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single fold

    bool operator==(const FoldStat&) const = default;
};

struct MetricsReport {
    ConfusionMatrix confusion;
    ClassMetrics benign;
    ClassMetrics malicious;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    double accuracy = 0.0;
    bool zero_division = false;

    std::string model_id;
    std::string template_version;
    std::map<std::string, std::uint64_t> seeds;
    std::uint64_t strict_verdicts = 0;
    std::uint64_t lenient_verdicts = 0;

    // Filled by cross_validate: pooled metrics above, per-fold reports and
    // mean/std across folds here.
    std::vector<MetricsReport> folds;
    std::map<std::string, FoldStat> fold_summary;

    bool operator==(const MetricsReport&) const = default;
};

// Zero-division yields 0 and sets the matching *_undefined flag and
// zero_division.
MetricsReport macro_metrics(const ConfusionMatrix& cm);

// Metrics plus the strict/lenient counts of the verdicts.
MetricsReport evaluate_verdicts(std::span<const VerdictResult> verdicts,
                                std::span<const int> labels);

// A classifier trained (or not) on `train` that predicts every row of `test`.
using Pipeline = std::function<std::vector<Prediction>(const FlowTable& train,
                                                       const FlowTable& test,
                                                       std::uint64_t fold_seed)>;

MetricsReport cross_validate(const FlowTable& table, int k, const Pipeline& pipeline,
                             std::uint64_t seed);

// Canonical JSON; equal reports give equal bytes.
std::string to_json(const MetricsReport& report);
MetricsReport metrics_from_json(std::string_view text);

// Model | Precision | Recall [| F1]
std::string metrics_table(std::span<const std::pair<std::string, MetricsReport>> rows,
                          bool with_f1 = false);

struct LatencyOptions {
    int runs = 10;
    int warmup_runs = 1;
    bool concurrent = false;  // backends only: run up to max_in_flight requests at once
};

struct LatencyReport {
    std::string subject_id;
    double mean_us = 0.0;  // per sample
    double std_us = 0.0;
    std::vector<double> samples_us;  // one per timed run
    std::size_t batch_size = 0;
    int runs = 0;
    int warmup_runs = 0;
    std::uint64_t parameter_count_or_nodes = 0;
    bool concurrent = false;
};

// Times `run_batch` (one full pass over `batch_size` samples) after the
// warm-up passes; each run contributes wall time / batch_size.
LatencyReport benchmark_latency(std::string subject_id, std::uint64_t parameter_count_or_nodes,
                                std::size_t batch_size, const std::function<void()>& run_batch,
                                const LatencyOptions& options = {});

// Times model prediction on the pre-encoded batch.
LatencyReport benchmark_baseline(const BaselineModel& model, const FlowTable& batch,
                                 const LatencyOptions& options = {});

LatencyReport benchmark_backend(ChatBackend& backend, const FlowTable& batch,
                                const PromptTemplate& tmpl, const std::string& model_id,
                                std::uint64_t parameter_count, const LatencyOptions& options = {});

std::string to_json(const LatencyReport& report);
std::string to_json(std::span<const LatencyReport> reports);

// Method | Inference Time (µs) | #Parameters
std::string latency_table(std::span<const LatencyReport> reports);

}  // namespace nidsllm
