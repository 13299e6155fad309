#include "nidsllm/evaluation.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/rng.hpp"
#include "text_table.hpp"

namespace nidsllm {

using json = nlohmann::json;

namespace {

struct Ratio {
    double value;
    bool undefined;
};

Ratio ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return {0.0, true};
    return {static_cast<double>(num) / static_cast<double>(den), false};
}

ClassMetrics class_metrics(std::uint64_t hit, std::uint64_t false_pos, std::uint64_t false_neg) {
    ClassMetrics m;
    const auto p = ratio(hit, hit + false_pos);
    const auto r = ratio(hit, hit + false_neg);
    const auto f = ratio(2 * hit, 2 * hit + false_pos + false_neg);
    m.precision = p.value;
    m.precision_undefined = p.undefined;
    m.recall = r.value;
    m.recall_undefined = r.undefined;
    m.f1 = f.value;
    m.f1_undefined = f.undefined;
    m.support = hit + false_neg;
    return m;
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

// Accumulates offsets from the first value so that equal inputs give exactly
// that value back (and a zero spread).
double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double offset = 0.0;
    for (double x : xs) offset += x - xs.front();
    return xs.front() + offset / static_cast<double>(xs.size());
}

json class_json(const ClassMetrics& m) {
    return {{"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"support", m.support},
            {"precision_undefined", m.precision_undefined},
            {"recall_undefined", m.recall_undefined},
            {"f1_undefined", m.f1_undefined}};
}

ClassMetrics class_from_json(const json& j) {
    ClassMetrics m;
    m.precision = j.at("precision").get<double>();
    m.recall = j.at("recall").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.support = j.at("support").get<std::uint64_t>();
    m.precision_undefined = j.at("precision_undefined").get<bool>();
    m.recall_undefined = j.at("recall_undefined").get<bool>();
    m.f1_undefined = j.at("f1_undefined").get<bool>();
    return m;
}

json report_json(const MetricsReport& r) {
    json j;
    j["confusion"] = {{"tp", r.confusion.tp},
                      {"fp", r.confusion.fp},
                      {"tn", r.confusion.tn},
                      {"fn", r.confusion.fn},
                      {"parse_failures", r.confusion.parse_failures}};
    j["benign"] = class_json(r.benign);
    j["malicious"] = class_json(r.malicious);
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    j["weighted_precision"] = r.weighted_precision;
    j["weighted_recall"] = r.weighted_recall;
    j["weighted_f1"] = r.weighted_f1;
    j["accuracy"] = r.accuracy;
    j["zero_division"] = r.zero_division;
    j["model_id"] = r.model_id;
    j["template_version"] = r.template_version;
    j["seeds"] = r.seeds;
    j["strict_verdicts"] = r.strict_verdicts;
    j["lenient_verdicts"] = r.lenient_verdicts;
    if (!r.folds.empty()) {
        json folds = json::array();
        for (const auto& f : r.folds) folds.push_back(report_json(f));
        j["folds"] = std::move(folds);
        json summary = json::object();
        for (const auto& [name, stat] : r.fold_summary)
            summary[name] = {{"mean", stat.mean}, {"std", stat.std}};
        j["fold_summary"] = std::move(summary);
    }
    return j;
}

MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                   c.at("tn").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>(),
                   c.at("parse_failures").get<std::uint64_t>()};
    r.benign = class_from_json(j.at("benign"));
    r.malicious = class_from_json(j.at("malicious"));
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.weighted_precision = j.at("weighted_precision").get<double>();
    r.weighted_recall = j.at("weighted_recall").get<double>();
    r.weighted_f1 = j.at("weighted_f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.zero_division = j.at("zero_division").get<bool>();
    r.model_id = j.value("model_id", std::string());
    r.template_version = j.value("template_version", std::string());
    r.seeds = j.value("seeds", std::map<std::string, std::uint64_t>());
    r.strict_verdicts = j.value("strict_verdicts", std::uint64_t{0});
    r.lenient_verdicts = j.value("lenient_verdicts", std::uint64_t{0});
    if (j.contains("folds"))
        for (const auto& f : j["folds"]) r.folds.push_back(report_from_json(f));
    if (j.contains("fold_summary"))
        for (const auto& [name, stat] : j["fold_summary"].items())
            r.fold_summary[name] = {stat.at("mean").get<double>(), stat.at("std").get<double>()};
    return r;
}

json latency_json(const LatencyReport& r) {
    return {{"subject_id", r.subject_id},
            {"mean_us", r.mean_us},
            {"std_us", r.std_us},
            {"samples_us", r.samples_us},
            {"batch_size", r.batch_size},
            {"runs", r.runs},
            {"warmup_runs", r.warmup_runs},
            {"parameter_count_or_nodes", r.parameter_count_or_nodes},
            {"concurrent", r.concurrent}};
}

}  // namespace

std::vector<Prediction> to_predictions(std::span<const VerdictResult> verdicts) {
    std::vector<Prediction> out;
    out.reserve(verdicts.size());
    for (const auto& v : verdicts) {
        if (const auto* ok = std::get_if<Verdict>(&v))
            out.emplace_back(ok->value);
        else
            out.emplace_back(std::nullopt);
    }
    return out;
}

std::vector<Prediction> to_predictions(std::span<const int> values) {
    return std::vector<Prediction>(values.begin(), values.end());
}

ConfusionMatrix confusion(std::span<const Prediction> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw ArgumentError("confusion: " + std::to_string(predictions.size()) +
                            " predictions for " + std::to_string(labels.size()) + " labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y != 0 && y != 1) throw ArgumentError("confusion: labels must be 0 or 1");
        if (!predictions[i]) {
            ++cm.parse_failures;
            continue;
        }
        const int p = *predictions[i];
        if (p != 0 && p != 1) throw ArgumentError("confusion: predictions must be 0 or 1");
        if (p == 1 && y == 1) ++cm.tp;
        else if (p == 1) ++cm.fp;
        else if (y == 0) ++cm.tn;
        else ++cm.fn;
    }
    return cm;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
    const auto preds = to_predictions(predictions);
    return confusion(std::span<const Prediction>(preds), labels);
}

MetricsReport macro_metrics(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.confusion = cm;
    r.malicious = class_metrics(cm.tp, cm.fp, cm.fn);
    r.benign = class_metrics(cm.tn, cm.fn, cm.fp);
    r.macro_precision = (r.benign.precision + r.malicious.precision) / 2;
    r.macro_recall = (r.benign.recall + r.malicious.recall) / 2;
    r.macro_f1 = (r.benign.f1 + r.malicious.f1) / 2;

    const auto n_ben = static_cast<double>(r.benign.support);
    const auto n_mal = static_cast<double>(r.malicious.support);
    const double n = n_ben + n_mal;
    bool weighted_undefined = false;
    if (n > 0) {
        r.weighted_precision = (n_ben * r.benign.precision + n_mal * r.malicious.precision) / n;
        r.weighted_recall = (n_ben * r.benign.recall + n_mal * r.malicious.recall) / n;
        r.weighted_f1 = (n_ben * r.benign.f1 + n_mal * r.malicious.f1) / n;
    } else {
        weighted_undefined = true;
    }
    const auto acc = ratio(cm.tp + cm.tn, cm.evaluated());
    r.accuracy = acc.value;

    const auto any = [](const ClassMetrics& m) {
        return m.precision_undefined || m.recall_undefined || m.f1_undefined;
    };
    r.zero_division = any(r.benign) || any(r.malicious) || weighted_undefined || acc.undefined;
    return r;
}

MetricsReport evaluate_verdicts(std::span<const VerdictResult> verdicts,
                                std::span<const int> labels) {
    const auto preds = to_predictions(verdicts);
    auto report = macro_metrics(confusion(std::span<const Prediction>(preds), labels));
    for (const auto& v : verdicts) {
        if (const auto* ok = std::get_if<Verdict>(&v)) {
            if (ok->lenient)
                ++report.lenient_verdicts;
            else
                ++report.strict_verdicts;
        }
    }
    return report;
}

MetricsReport cross_validate(const FlowTable& table, int k, const Pipeline& pipeline,
                             std::uint64_t seed) {
    const auto folds = kfold(table, k, seed);
    std::vector<MetricsReport> reports;
    ConfusionMatrix pooled;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto& fold = folds[i];
        const auto fold_seed = Rng::derive(seed, i);
        const auto preds = pipeline(fold.train, fold.test, fold_seed);
        if (preds.size() != fold.test.size())
            throw ArgumentError("fold " + std::to_string(i) + ": pipeline returned " +
                                std::to_string(preds.size()) + " predictions for " +
                                std::to_string(fold.test.size()) + " rows");
        const auto labels = fold.test.labels();
        auto report = macro_metrics(confusion(std::span<const Prediction>(preds), labels));
        report.seeds = {{"cv", seed}, {"fold", fold_seed}, {"fold_index", i}};
        pooled.tp += report.confusion.tp;
        pooled.fp += report.confusion.fp;
        pooled.tn += report.confusion.tn;
        pooled.fn += report.confusion.fn;
        pooled.parse_failures += report.confusion.parse_failures;
        reports.push_back(std::move(report));
    }

    auto out = macro_metrics(pooled);
    out.seeds = {{"cv", seed}};
    const std::pair<const char*, double MetricsReport::*> tracked[] = {
        {"macro_precision", &MetricsReport::macro_precision},
        {"macro_recall", &MetricsReport::macro_recall},
        {"macro_f1", &MetricsReport::macro_f1},
        {"weighted_precision", &MetricsReport::weighted_precision},
        {"weighted_recall", &MetricsReport::weighted_recall},
        {"weighted_f1", &MetricsReport::weighted_f1},
        {"accuracy", &MetricsReport::accuracy},
    };
    for (const auto& [name, member] : tracked) {
        std::vector<double> xs;
        for (const auto& r : reports) xs.push_back(r.*member);
        const double m = mean_of(xs);
        out.fold_summary[name] = {m, sample_std(xs, m)};
    }
    out.folds = std::move(reports);
    return out;
}

std::string to_json(const MetricsReport& report) { return report_json(report).dump(2); }

MetricsReport metrics_from_json(std::string_view text) {
    try {
        return report_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed metrics report: ") + e.what());
    }
}

std::string metrics_table(std::span<const std::pair<std::string, MetricsReport>> rows,
                          bool with_f1) {
    std::vector<std::string> header{"Model", "Precision", "Recall"};
    if (with_f1) header.push_back("F1");
    std::vector<std::vector<std::string>> body;
    for (const auto& [name, r] : rows) {
        std::vector<std::string> row{name, detail::fixed(r.macro_precision, 4),
                                     detail::fixed(r.macro_recall, 4)};
        if (with_f1) row.push_back(detail::fixed(r.macro_f1, 4));
        body.push_back(std::move(row));
    }
    return detail::render_table(header, body);
}

LatencyReport benchmark_latency(std::string subject_id, std::uint64_t parameter_count_or_nodes,
                                std::size_t batch_size, const std::function<void()>& run_batch,
                                const LatencyOptions& options) {
    if (options.runs < 1) throw ArgumentError("latency benchmark needs at least one run");
    if (options.warmup_runs < 0) throw ArgumentError("warm-up runs cannot be negative");
    if (batch_size == 0) throw ArgumentError("latency benchmark needs a non-empty batch");

    for (int i = 0; i < options.warmup_runs; ++i) run_batch();

    LatencyReport report;
    report.subject_id = std::move(subject_id);
    report.batch_size = batch_size;
    report.runs = options.runs;
    report.warmup_runs = options.warmup_runs;
    report.parameter_count_or_nodes = parameter_count_or_nodes;
    report.concurrent = options.concurrent;
    for (int i = 0; i < options.runs; ++i) {
        const auto start = std::chrono::steady_clock::now();
        run_batch();
        const std::chrono::duration<double, std::micro> elapsed =
            std::chrono::steady_clock::now() - start;
        report.samples_us.push_back(elapsed.count() / static_cast<double>(batch_size));
    }
    report.mean_us = mean_of(report.samples_us);
    report.std_us = sample_std(report.samples_us, report.mean_us);
    return report;
}

LatencyReport benchmark_baseline(const BaselineModel& model, const FlowTable& batch,
                                 const LatencyOptions& options) {
    if (options.concurrent)
        throw ArgumentError("concurrent mode applies to backends only");
    const auto matrix = model.encoder.transform(batch);
    std::vector<int> sink;
    auto report = benchmark_latency(
        model.kind(), model.node_count(), batch.size(),
        [&] { sink = model.predict(matrix); }, options);
    return report;
}

LatencyReport benchmark_backend(ChatBackend& backend, const FlowTable& batch,
                                const PromptTemplate& tmpl, const std::string& model_id,
                                std::uint64_t parameter_count, const LatencyOptions& options) {
    std::vector<ChatRequest> requests;
    requests.reserve(batch.size());
    for (const auto& row : batch) requests.push_back(classification_request(row, tmpl, model_id));
    const int workers = options.concurrent ? backend.max_in_flight() : 1;
    return benchmark_latency(
        backend.id(), parameter_count, batch.size(),
        [&] { complete_all(backend, requests, workers); }, options);
}

std::string to_json(const LatencyReport& report) { return latency_json(report).dump(2); }

std::string to_json(std::span<const LatencyReport> reports) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(latency_json(r));
    return arr.dump(2);
}

std::string latency_table(std::span<const LatencyReport> reports) {
    std::vector<std::vector<std::string>> body;
    for (const auto& r : reports) {
        auto name = r.subject_id;
        if (r.concurrent) name += " (concurrent)";
        body.push_back({name, detail::fixed(r.mean_us, 2), std::to_string(r.parameter_count_or_nodes)});
    }
    return detail::render_table({"Method", "Inference Time (µs)", "#Parameters"}, body);
}

}  // namespace nidsllm
