#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "nidsllm/baselines.hpp"
#include "nidsllm/digest.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/evaluation.hpp"
#include "nidsllm/explain.hpp"
#include "nidsllm/finetune_export.hpp"
#include "nidsllm/llm_backend.hpp"
#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"
#include "nidsllm/registry.hpp"

namespace nidsllm::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct CommonOptions {
    std::vector<std::string> configs;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
};

class Run {
public:
    Run(std::string command, const CommonOptions& opts, std::ostream& log)
        : command_(std::move(command)), log_(log), cfg_(RunConfig::defaults()) {
        for (const auto& path : opts.configs) cfg_.merge(RunConfig::load(path));
        for (const auto& s : opts.sets) cfg_.set(s);
        if (opts.seed) cfg_.set("run", "seed", std::to_string(*opts.seed));
        if (!opts.out.empty()) cfg_.set("run", "out", opts.out);
        seeds_ = cfg_.resolve_seeds();
        check_inputs();
        digest_ = cfg_.digest();
        out_ = cfg_.out_dir();
        fs::create_directories(out_);
    }

    const RunConfig& cfg() const { return cfg_; }
    const std::string& digest() const { return digest_; }
    std::uint64_t seed(const std::string& section) const { return seeds_.at(section + ".seed"); }
    const fs::path& out() const { return out_; }
    std::ostream& log() { return log_; }

    fs::path output(const std::string& name) {
        outputs_.push_back(name);
        return out_ / name;
    }

    void write(const std::string& name, const std::string& body) {
        const auto path = output(name);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + path.string());
        f << body;
        if (body.empty() || body.back() != '\n') f << '\n';
        if (!f) throw IoError("failed writing " + path.string());
    }

    ordered_json stamp() const {
        ordered_json j;
        j["config_digest"] = digest_;
        j["seeds"] = seeds_;
        return j;
    }

    void finish() {
        write("run.conf", cfg_.serialize());
        ordered_json m;
        m["tool"] = "nidsllm";
        m["version"] = kToolVersion;
        m["command"] = command_;
        m["config_digest"] = digest_;
        m["seeds"] = seeds_;
        outputs_.push_back("run_manifest.json");
        m["outputs"] = outputs_;
        const auto path = out_ / "run_manifest.json";
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + path.string());
        f << m.dump(2) << '\n';
        if (!f) throw IoError("failed writing " + path.string());
        log_ << command_ << ": wrote " << outputs_.size() << " files to " << out_.string() << "\n";
    }

private:
    void check_inputs() const {
        static const std::vector<std::pair<std::string, std::string>> inputs = {
            {"dataset", "path"},       {"dataset", "train_path"}, {"dataset", "test_path"},
            {"dataset", "schema"},     {"backend", "transcript"}, {"prompt", "template"},
            {"prompt", "explain_template"}, {"bench", "dt_model"}, {"bench", "rf_model"},
            {"explain", "registry"},   {"explain", "predictions"}};
        for (const auto& [section, key] : inputs) {
            if (!cfg_.has(section, key)) continue;
            const auto v = cfg_.str(section, key);
            if (section == "dataset" && key == "schema") {
                const auto ids = builtin_schema_ids();
                if (std::find(ids.begin(), ids.end(), v) != ids.end()) continue;
            }
            if (section == "prompt" && (v == kClassifyTemplateId || v == kExplainTemplateId))
                continue;
            if (!fs::exists(v))
                throw ConfigError(section + "." + key + ": file not found: " + v);
        }
    }

    std::string command_;
    std::ostream& log_;
    RunConfig cfg_;
    std::map<std::string, std::uint64_t> seeds_;
    std::string digest_;
    fs::path out_;
    std::vector<std::string> outputs_;
};

DatasetSchema schema_of(const RunConfig& cfg) {
    auto schema = resolve_schema(cfg.str("dataset", "schema"));
    const auto excluded = cfg.list("dataset", "exclude");
    if (!excluded.empty()) schema = schema.without(excluded);
    return schema;
}

FlowTable load_source(const Run& run) {
    const auto& cfg = run.cfg();
    if (!cfg.has("dataset", "path")) throw ConfigError("dataset.path is required");
    auto table = load_dataset(cfg.str("dataset", "path"), schema_of(cfg));
    const auto n = cfg.u64("dataset", "subsample");
    if (n > 0 && n < table.size())
        table = subsample(table, n, cfg.boolean("dataset", "subsample_stratified"),
                          run.seed("dataset"));
    return table;
}

SplitSpec split_spec(const Run& run) {
    SplitSpec spec;
    spec.test_fraction = run.cfg().real("split", "test_fraction");
    spec.stratify_by = run.cfg().str("split", "stratify_by");
    spec.seed = run.seed("split");
    return spec;
}

TrainTest train_test(const Run& run) {
    const auto& cfg = run.cfg();
    if (cfg.has("dataset", "train_path") && cfg.has("dataset", "test_path")) {
        const auto schema = schema_of(cfg);
        return {load_dataset(cfg.str("dataset", "train_path"), schema),
                load_dataset(cfg.str("dataset", "test_path"), schema)};
    }
    return stratified_split(load_source(run), split_spec(run));
}

FlowTable test_table(const Run& run) {
    const auto& cfg = run.cfg();
    if (cfg.has("dataset", "test_path"))
        return load_dataset(cfg.str("dataset", "test_path"), schema_of(cfg));
    return train_test(run).test;
}

BackendConfig backend_config(const RunConfig& cfg) {
    BackendConfig b;
    b.kind = parse_backend_kind(cfg.str("backend", "kind"));
    b.endpoint_url = cfg.str("backend", "endpoint_url");
    b.auth_token_env = cfg.str("backend", "auth_token_env");
    b.retry_limit = static_cast<int>(cfg.integer("backend", "retry_limit"));
    b.timeout = std::chrono::milliseconds(cfg.integer("backend", "timeout_ms"));
    b.backoff_base = std::chrono::milliseconds(cfg.integer("backend", "backoff_ms"));
    b.mock_rule = cfg.str("backend", "mock_rule");
    b.transcript_path = cfg.str("backend", "transcript");
    b.injected_delay = std::chrono::microseconds(cfg.integer("backend", "injected_delay_us"));
    b.max_in_flight = static_cast<int>(cfg.integer("backend", "max_in_flight"));
    b.validate();
    return b;
}

// Configured backend, optionally wrapped to record a transcript.
class BackendHandle {
public:
    explicit BackendHandle(const RunConfig& cfg) : config_(backend_config(cfg)) {
        inner_ = make_backend(config_);
        if (cfg.has("backend", "record_transcript")) {
            writer_ = std::make_unique<TranscriptWriter>(cfg.str("backend", "record_transcript"));
            recording_ = std::make_unique<RecordingBackend>(*inner_, *writer_);
        }
    }

    ChatBackend& get() { return recording_ ? *recording_ : *inner_; }

    // The label-echo test rules need to know the answers.
    void provide_answers(const FlowTable& table, const PromptTemplate& tmpl) {
        if (auto* mock = dynamic_cast<MockBackend*>(inner_.get()))
            mock->set_answer_key(make_answer_key(table, tmpl));
    }

private:
    BackendConfig config_;
    std::unique_ptr<ChatBackend> inner_;
    std::unique_ptr<TranscriptWriter> writer_;
    std::unique_ptr<RecordingBackend> recording_;
};

ordered_json split_json(const Run& run, const FlowTable& source, const SplitIndices& idx,
                        const SplitSpec& spec) {
    ordered_json j = run.stamp();
    j["format"] = "nidsllm-split-manifest";
    j["source"] = source.provenance().source;
    j["rows"] = source.size();
    j["test_fraction"] = spec.test_fraction;
    j["stratify_by"] = spec.stratify_by.empty() ? source.schema().attack_column : spec.stratify_by;
    auto rows_of = [&](const std::vector<std::size_t>& positions) {
        std::vector<std::size_t> rows;
        rows.reserve(positions.size());
        for (auto p : positions) rows.push_back(source[p].source_row());
        return rows;
    };
    j["train_rows"] = rows_of(idx.train);
    j["test_rows"] = rows_of(idx.test);
    return j;
}

void write_csv(Run& run, const std::string& name, const FlowTable& table) {
    const auto path = run.output(name);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    write_dataset(table, f);
    if (!f) throw IoError("failed writing " + path.string());
}

int cmd_split(Run& run) {
    const auto source = load_source(run);
    const auto spec = split_spec(run);
    const auto idx = stratified_split_indices(source, spec);
    const auto train = source.select(idx.train, "train");
    const auto test = source.select(idx.test, "test");
    write_csv(run, "train.csv", train);
    write_csv(run, "test.csv", test);
    run.write("split_manifest.json", split_json(run, source, idx, spec).dump(2));
    run.log() << "split: " << train.size() << " train rows, " << test.size() << " test rows\n";
    run.finish();
    return 0;
}

std::string predictions_jsonl(const FlowTable& table, std::span<const Classification> results) {
    std::string out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        ordered_json j;
        j["index"] = i;
        j["source_row"] = table[i].source_row();
        j["label"] = table[i].label();
        if (const auto* v = std::get_if<Verdict>(&results[i].verdict)) {
            j["verdict"] = v->value;
            j["lenient"] = v->lenient;
        } else {
            j["verdict"] = nullptr;
            j["lenient"] = false;
        }
        j["completion_sha256"] = sha256_hex(results[i].response.content);
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<VerdictResult> verdicts_of(std::span<const Classification> results) {
    std::vector<VerdictResult> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.verdict);
    return out;
}

void stamp_report(MetricsReport& report, const Run& run, const std::string& model_id,
                  const std::string& template_version) {
    report.model_id = model_id;
    report.template_version = template_version;
    for (const auto& section : {"dataset", "split", "classify"})
        report.seeds[std::string(section)] = run.seed(section);
}

std::string metrics_document(const MetricsReport& report, const Run& run) {
    auto j = ordered_json::parse(to_json(report));
    j["config_digest"] = run.digest();
    return j.dump(2);
}

int cmd_classify(Run& run) {
    const auto& cfg = run.cfg();
    const auto tmpl = resolve_template(cfg.str("prompt", "template"));
    const auto model_id = cfg.str("backend", "model_id");
    const int workers = static_cast<int>(cfg.integer("backend", "workers"));
    BackendHandle backend(cfg);
    const auto folds = cfg.integer("classify", "cv_folds");

    MetricsReport report;
    if (folds > 0) {
        const auto table = load_source(run);
        backend.provide_answers(table, tmpl);
        std::string lines;
        std::size_t offset = 0;
        Pipeline pipeline = [&](const FlowTable&, const FlowTable& test, std::uint64_t) {
            auto results = classify_table(backend.get(), test, tmpl, model_id, workers);
            auto block = predictions_jsonl(test, results);
            lines += block;
            offset += results.size();
            return to_predictions(std::span<const VerdictResult>(verdicts_of(results)));
        };
        report = cross_validate(table, static_cast<int>(folds), pipeline, run.seed("classify"));
        run.write("predictions.jsonl", lines);
    } else {
        const auto test = test_table(run);
        backend.provide_answers(test, tmpl);
        const auto results = classify_table(backend.get(), test, tmpl, model_id, workers);
        const auto verdicts = verdicts_of(results);
        const auto labels = test.labels();
        report = evaluate_verdicts(verdicts, labels);
        run.write("predictions.jsonl", predictions_jsonl(test, results));
    }
    stamp_report(report, run, model_id, tmpl.id);
    run.write("metrics.json", metrics_document(report, run));
    const std::pair<std::string, MetricsReport> row{model_id, report};
    auto text = metrics_table(std::span(&row, 1), true);
    if (report.confusion.parse_failures)
        text += "parse failures: " + std::to_string(report.confusion.parse_failures) + "\n";
    if (report.zero_division) text += "note: undefined ratios reported as 0\n";
    run.write("metrics.txt", text);
    run.log() << text;
    run.finish();
    return 0;
}

int cmd_finetune_export(Run& run) {
    const auto& cfg = run.cfg();
    const auto tmpl = resolve_template(cfg.str("prompt", "template"));
    const auto method = parse_corpus_method(cfg.str("finetune", "method"));
    const auto sampling = parse_budget_sampling(cfg.str("finetune", "sampling"));
    const auto seed = run.seed("finetune");
    const auto budgets = cfg.list("finetune", "budgets");
    if (budgets.empty()) throw ConfigError("finetune.budgets is empty");
    const auto train = train_test(run).train;

    ordered_json audits = ordered_json::array();
    for (const auto& b : budgets) {
        std::size_t budget = 0;
        try {
            budget = std::stoull(b);
        } catch (const std::exception&) {
            throw ConfigError("finetune.budgets: '" + b + "' is not a number");
        }
        const auto name = std::string(corpus_method_name(method)) + "-" + b + ".jsonl";
        CorpusManifest base;
        base.dataset_id = train.schema().id;
        base.budget = budget;
        base.seed = seed;
        base.method = method;
        base.template_version = tmpl.id;
        base.sampling = sampling;
        base.config_digest = run.digest();
        const auto path = run.output(name);
        if (method == CorpusMethod::orpo) {
            const auto pairs = build_orpo_pairs(train, tmpl, budget, seed, sampling);
            export_jsonl(pairs, describe_corpus(pairs, train, base), path);
        } else {
            const auto examples = build_kto_examples(train, tmpl, budget, seed, sampling);
            export_jsonl(examples, describe_corpus(examples, train, base), path);
        }
        run.output(manifest_path(name).string());
        const auto audit = audit_export(path, train);
        audits.push_back({{"corpus", name},
                          {"rows", audit.rows},
                          {"label_mismatches", audit.label_mismatches},
                          {"prompt_mismatches", audit.prompt_mismatches},
                          {"structural_errors", audit.structural_errors},
                          {"ok", audit.ok()}});
        run.log() << name << ": " << audit.rows << " rows" << (audit.ok() ? "" : " (audit FAILED)")
                  << "\n";
        if (!audit.ok()) throw DataError(name + " failed its audit");
    }
    auto j = run.stamp();
    j["audits"] = std::move(audits);
    run.write("corpus_audit.json", j.dump(2));
    run.finish();
    return 0;
}

BaselineModel train_baseline(const RunConfig& cfg, const FlowTable& train, std::uint64_t seed) {
    NumericizeOptions opts;
    opts.non_numeric = parse_non_numeric_policy(cfg.str("baseline", "non_numeric"));
    BaselineModel model;
    model.encoder = FeatureEncoder::fit(train, opts);
    const auto x = model.encoder.transform(train);
    const auto y = train.labels();
    const auto kind = cfg.str("baseline", "kind");
    if (kind == "dt") {
        TreeParams p;
        p.max_depth = static_cast<int>(cfg.integer("baseline", "max_depth"));
        p.min_leaf = cfg.u64("baseline", "min_leaf");
        p.seed = seed;
        model.model = train_decision_tree(x, y, p);
    } else if (kind == "rf") {
        ForestParams p;
        p.n_trees = cfg.u64("baseline", "n_trees");
        p.max_depth = static_cast<int>(cfg.integer("baseline", "max_depth"));
        p.min_leaf = cfg.u64("baseline", "min_leaf");
        p.feature_subsample = cfg.u64("baseline", "feature_subsample");
        p.bootstrap = cfg.boolean("baseline", "bootstrap");
        p.workers = static_cast<unsigned>(cfg.u64("baseline", "workers"));
        p.seed = seed;
        model.model = train_random_forest(x, y, p);
    } else {
        throw ConfigError("baseline.kind must be dt or rf, got '" + kind + "'");
    }
    return model;
}

int cmd_train_baseline(Run& run) {
    const auto& cfg = run.cfg();
    const auto tt = train_test(run);
    const auto start = std::chrono::steady_clock::now();
    const auto model = train_baseline(cfg, tt.train, run.seed("baseline"));
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;

    save_baseline(model, run.output("model.json"));
    auto test_report = macro_metrics(confusion(model.predict(tt.test), tt.test.labels()));
    auto train_report = macro_metrics(confusion(model.predict(tt.train), tt.train.labels()));
    for (auto* r : {&test_report, &train_report}) {
        r->model_id = model.kind();
        r->seeds = {{"dataset", run.seed("dataset")},
                    {"split", run.seed("split")},
                    {"baseline", run.seed("baseline")}};
    }
    run.write("metrics.json", metrics_document(test_report, run));
    run.write("train_metrics.json", metrics_document(train_report, run));

    auto summary = run.stamp();
    summary["kind"] = model.kind();
    summary["node_count"] = model.node_count();
    if (const auto* f = std::get_if<ForestModel>(&model.model)) summary["n_trees"] = f->n_trees();
    summary["features"] = model.encoder.column_names();
    summary["train_rows"] = tt.train.size();
    summary["test_rows"] = tt.test.size();
    summary["train_seconds"] = took.count();
    summary["test_weighted_f1"] = test_report.weighted_f1;
    summary["test_macro_f1"] = test_report.macro_f1;
    run.write("baseline.json", summary.dump(2));

    const std::pair<std::string, MetricsReport> rows[] = {{model.kind() + " (test)", test_report},
                                                          {model.kind() + " (train)", train_report}};
    auto text = metrics_table(rows, true);
    text += "weighted F1 (test): " + std::to_string(test_report.weighted_f1) + "\n";
    text += "nodes: " + std::to_string(model.node_count()) + "\n";
    run.write("metrics.txt", text);
    run.log() << text;
    run.finish();
    return 0;
}

FlowTable bench_batch(const Run& run) {
    auto batch = test_table(run);
    const auto n = run.cfg().u64("bench", "batch_size");
    if (n > 0 && n < batch.size()) {
        std::vector<std::size_t> first(n);
        for (std::size_t i = 0; i < n; ++i) first[i] = i;
        batch = batch.select(first, "bench");
    }
    return batch;
}

int cmd_bench(Run& run) {
    const auto& cfg = run.cfg();
    const auto subjects = cfg.list("bench", "subjects");
    if (subjects.empty()) throw ConfigError("bench.subjects is empty");
    for (const auto& s : subjects) {
        if ((s == "dt" || s == "rf") && !cfg.has("bench", s + "_model"))
            throw ConfigError("bench subject '" + s + "' needs bench." + s + "_model");
        if (s != "dt" && s != "rf" && s != "mock-llm" && s != "llm")
            throw ConfigError("unknown bench subject '" + s + "'; use dt, rf, mock-llm or llm");
    }
    LatencyOptions opts;
    opts.runs = static_cast<int>(cfg.integer("bench", "runs"));
    opts.warmup_runs = static_cast<int>(cfg.integer("bench", "warmup"));
    const bool concurrent = cfg.boolean("bench", "concurrent");
    const auto batch = bench_batch(run);
    const auto tmpl = resolve_template(cfg.str("prompt", "template"));
    const auto model_id = cfg.str("backend", "model_id");
    const auto llm_params = cfg.u64("bench", "llm_parameters");

    std::vector<LatencyReport> reports;
    for (const auto& s : subjects) {
        run.log() << "bench: " << s << " on " << batch.size() << " rows\n";
        if (s == "dt" || s == "rf") {
            const auto model = load_baseline(cfg.str("bench", s + "_model"));
            if (model.kind() != s)
                throw ConfigError("bench." + s + "_model holds a " + model.kind() + " model");
            reports.push_back(benchmark_baseline(model, batch, opts));
        } else if (s == "mock-llm") {
            MockBackend mock("always:0",
                             std::chrono::microseconds(cfg.integer("bench", "mock_delay_us")),
                             static_cast<int>(cfg.integer("backend", "max_in_flight")));
            auto o = opts;
            o.concurrent = concurrent;
            reports.push_back(benchmark_backend(mock, batch, tmpl, model_id, llm_params, o));
        } else {
            BackendHandle backend(cfg);
            backend.provide_answers(batch, tmpl);
            auto o = opts;
            o.concurrent = concurrent;
            reports.push_back(benchmark_backend(backend.get(), batch, tmpl, model_id, llm_params, o));
        }
    }
    auto j = run.stamp();
    j["reports"] = ordered_json::parse(to_json(std::span<const LatencyReport>(reports)));
    run.write("latency.json", j.dump(2));
    const auto text = latency_table(reports);
    run.write("latency.txt", text);
    run.log() << text;
    run.finish();
    return 0;
}

// Verdicts from an earlier classify run, aligned with `table` by index.
std::vector<VerdictResult> read_predictions(const fs::path& path, const FlowTable& table) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<VerdictResult> out(table.size(), ParseFailure{});
    std::vector<bool> seen(table.size(), false);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = ordered_json::parse(line);
        const auto index = j.at("index").get<std::size_t>();
        if (index >= table.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": index beyond the test table");
        if (j.contains("source_row") &&
            j["source_row"].get<std::size_t>() != table[index].source_row())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": predictions do not belong to this test table");
        if (!j.at("verdict").is_null())
            out[index] = Verdict{j["verdict"].get<int>(), {}, j.value("lenient", false)};
        seen[index] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw DataError(path.string() + " does not cover every test row");
    return out;
}

int cmd_explain(Run& run) {
    const auto& cfg = run.cfg();
    const auto test = test_table(run);
    const auto model_id = cfg.str("backend", "model_id");
    const auto registry = cfg.has("explain", "registry")
                              ? ProtocolRegistry::load(cfg.str("explain", "registry"))
                              : ProtocolRegistry::builtin();
    BackendHandle backend(cfg);
    const int workers = static_cast<int>(cfg.integer("backend", "workers"));

    std::vector<VerdictResult> verdicts;
    if (cfg.has("explain", "predictions")) {
        verdicts = read_predictions(cfg.str("explain", "predictions"), test);
    } else {
        const auto tmpl = resolve_template(cfg.str("prompt", "template"));
        backend.provide_answers(test, tmpl);
        const auto results = classify_table(backend.get(), test, tmpl, model_id, workers);
        verdicts = verdicts_of(results);
        run.write("predictions.jsonl", predictions_jsonl(test, results));
    }

    const auto exemplars =
        select_exemplars(verdicts, test, cfg.u64("explain", "n_per_cell"), run.seed("explain"));
    const auto explain_tmpl = resolve_template(cfg.str("prompt", "explain_template"));
    auto records = generate_explanations(backend.get(), exemplars, explain_tmpl, model_id, registry,
                                         workers);
    for (const auto& r : records)
        if (!r.error.empty())
            run.log() << "explain: row " << r.exemplar.record.source_row() << ": " << r.error << "\n";
    const auto report = build_explanation_report(exemplars, std::move(records), registry, model_id,
                                                 explain_tmpl.id);
    auto j = ordered_json::parse(to_json(report));
    j["config_digest"] = run.digest();
    run.write("explanations.json", j.dump(2));
    const auto text = to_text(report);
    run.write("explanations.txt", text);
    run.log() << "explain: " << report.explanations.size() << " explanations, "
              << report.overall.claims << " claims\n";
    run.finish();
    return 0;
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_dir,
               std::ostream& out) {
    if (files.empty()) throw ConfigError("report needs at least one JSON file");
    std::vector<std::pair<std::string, MetricsReport>> metrics;
    std::vector<LatencyReport> latency;
    std::string explanation_text;
    for (const auto& file : files) {
        const auto text = read_all(file);
        const auto j = ordered_json::parse(text);
        if (j.contains("macro_precision")) {
            auto r = metrics_from_json(text);
            const auto name = r.model_id.empty() ? fs::path(file).stem().string() : r.model_id;
            metrics.emplace_back(name, std::move(r));
        } else if (j.contains("reports")) {
            for (const auto& r : j["reports"]) {
                LatencyReport l;
                l.subject_id = r.at("subject_id").get<std::string>();
                l.mean_us = r.at("mean_us").get<double>();
                l.std_us = r.at("std_us").get<double>();
                l.batch_size = r.at("batch_size").get<std::size_t>();
                l.runs = r.at("runs").get<int>();
                l.parameter_count_or_nodes = r.at("parameter_count_or_nodes").get<std::uint64_t>();
                l.concurrent = r.value("concurrent", false);
                latency.push_back(std::move(l));
            }
        } else if (j.contains("cells") && j.contains("overall")) {
            explanation_text += "Explanations (" + fs::path(file).filename().string() + ")\n";
            for (const auto& [cell, d] : j["cells"].items()) {
                const auto& rate = d.at("hallucination_rate");
                explanation_text += "  " + cell + ": " +
                                    std::to_string(d.at("explanations").get<std::size_t>()) +
                                    " explained, hallucination rate " +
                                    (rate.is_null() ? std::string("n/a") : std::to_string(rate.get<double>())) +
                                    "\n";
            }
        } else {
            throw DataError(file + ": not a metrics, latency or explanation report");
        }
    }
    std::string text;
    if (!metrics.empty()) text += metrics_table(metrics, true);
    if (!latency.empty()) text += (text.empty() ? "" : "\n") + latency_table(latency);
    if (!explanation_text.empty()) text += (text.empty() ? "" : "\n") + explanation_text;
    out << text;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream f(fs::path(out_dir) / "report.txt", std::ios::binary | std::ios::trunc);
        f << text;
        if (!f) throw IoError("cannot write report.txt");
    }
    return 0;
}

void add_common(CLI::App* sub, CommonOptions& opts) {
    sub->add_option("--config,-c", opts.configs, "Config file (repeatable; later files win)");
    sub->add_option("--seed", opts.seed, "Master seed; section seeds derive from it");
    sub->add_option("--out,-o", opts.out, "Output directory");
    sub->add_option("--set", opts.sets, "Override a config key: section.key=value");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"LLM and classical baselines for NetFlow intrusion detection", "nidsllm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonOptions opts;
    std::vector<std::string> report_files;
    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(Run&);
    };
    const Entry entries[] = {
        {"split", "Stratified train/test split with row manifests", cmd_split},
        {"classify", "Classify flows with a chat backend and score them", cmd_classify},
        {"finetune-export", "Write ORPO or KTO fine-tuning corpora", cmd_finetune_export},
        {"train-baseline", "Train a decision tree or random forest", cmd_train_baseline},
        {"bench", "Per-sample inference latency of models and backends", cmd_bench},
        {"explain", "Explain TP/FP/TN/FN exemplars and fact-check the claims", cmd_explain},
    };
    std::vector<std::pair<CLI::App*, const Entry*>> subs;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        add_common(sub, opts);
        subs.emplace_back(sub, &e);
    }
    auto* report = app.add_subcommand("report", "Render metrics/latency/explanation JSON as tables");
    report->add_option("files", report_files, "Report files")->required();
    report->add_option("--out,-o", opts.out, "Also write report.txt here");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "nidsllm: " << e.what() << "\n";
        return 2;
    }

    try {
        if (report->parsed()) return cmd_report(report_files, opts.out, out);
        for (const auto& [sub, entry] : subs) {
            if (!sub->parsed()) continue;
            Run r(entry->name, opts, err);
            return entry->fn(r);
        }
    } catch (const ConfigError& e) {
        err << "nidsllm: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "nidsllm: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace nidsllm::cli
