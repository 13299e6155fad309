// Acceptance checks. With no argument every criterion runs; with a number
// only that one. Prints one "C<n> PASS|FAIL: ..." line per criterion and exits
// nonzero when any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "metric_oracle.hpp"
#include "nidsllm/baselines.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/evaluation.hpp"
#include "nidsllm/explain.hpp"
#include "nidsllm/finetune_export.hpp"
#include "nidsllm/llm_backend.hpp"
#include "nidsllm/netflow_data.hpp"
#include "nidsllm/prompt_codec.hpp"
#include "nidsllm/registry.hpp"
#include "nidsllm/rng.hpp"

using namespace nidsllm;
using namespace nidsllm::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(digits);
    o << v;
    return o.str();
}

// NF-UNSW-NB15-v2 CSV, when one is available locally.
std::optional<fs::path> dataset_path() {
    if (const char* env = std::getenv("NIDSLLM_UNSW_NB15_V2_CSV"); env && *env) {
        if (fs::exists(env)) return fs::path(env);
    }
    for (const auto* candidate : {"data/NF-UNSW-NB15-v2.csv", "../data/NF-UNSW-NB15-v2.csv"})
        if (fs::exists(candidate)) return fs::path(candidate);
    return std::nullopt;
}

// Real rows when the dataset is present, otherwise synthetic rows in the same layout.
FlowTable sample_rows(std::size_t n, std::uint64_t seed, std::string& origin) {
    if (auto path = dataset_path()) {
        const auto full = load_dataset(*path, builtin_schema(kUnswNb15V2));
        origin = path->string();
        return n < full.size() ? subsample(full, n, true, seed) : full;
    }
    origin = "synthetic";
    return synthetic_flows({.rows = n, .overlap = 0.05, .seed = seed});
}

// ---- C1: metric oracle equivalence ----

Outcome c1() {
    const auto start = Clock::now();
    std::size_t cases = 0, mismatches = 0;
    double worst = 0.0;
    std::vector<int> pred, label;
    for (std::uint64_t tp = 0; tp <= 5; ++tp)
        for (std::uint64_t fp = 0; fp <= 5; ++fp)
            for (std::uint64_t tn = 0; tn <= 5; ++tn)
                for (std::uint64_t fn = 0; fn <= 5; ++fn) {
                    ++cases;
                    expand_cells(tp, fp, tn, fn, pred, label);
                    const auto want = oracle_metrics(pred, label);
                    const auto got = macro_metrics(confusion(std::span<const int>(pred),
                                                             std::span<const int>(label)));
                    const double diffs[] = {
                        got.macro_precision - want.macro_precision,
                        got.macro_recall - want.macro_recall,
                        got.macro_f1 - want.macro_f1,
                        got.weighted_precision - want.weighted_precision,
                        got.weighted_recall - want.weighted_recall,
                        got.weighted_f1 - want.weighted_f1,
                    };
                    double local = 0.0;
                    for (double d : diffs) local = std::max(local, std::abs(d));
                    worst = std::max(worst, local);
                    if (local > 1e-12) ++mismatches;
                }
    const double took = seconds_since(start);

    ConfusionMatrix hand;
    hand.tp = 40;
    hand.fp = 10;
    hand.tn = 45;
    hand.fn = 5;
    const double hand_mp = macro_metrics(hand).macro_precision;
    const bool hand_ok = std::abs(hand_mp - 0.85) <= 1e-12;

    Outcome o;
    o.pass = cases == 1296 && mismatches == 0 && took < 1.0 && hand_ok;
    o.detail = std::to_string(cases) + " matrices, " + std::to_string(mismatches) +
               " mismatches, max |diff| " + std::to_string(worst) + ", " + fmt(took, 3) +
               " s; hand case macro_precision " + fmt(hand_mp, 3);
    return o;
}

// ---- C2: replay reproducibility and the all-benign mock ----

// 500 benign and 500 malicious rows drawn with a seeded shuffle per label.
FlowTable balanced_thousand(const FlowTable& source, std::uint64_t seed) {
    std::vector<std::size_t> by_label[2];
    for (std::size_t i = 0; i < source.size(); ++i) by_label[source[i].label() == 1].push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> picked;
    for (auto& group : by_label) {
        if (group.size() < 500) throw DataError("fewer than 500 rows of a label");
        rng.shuffle(std::span<std::size_t>(group));
        picked.insert(picked.end(), group.begin(), group.begin() + 500);
    }
    std::sort(picked.begin(), picked.end());
    return source.select(picked, "balanced-1000");
}

Outcome c2() {
    std::string origin;
    const auto table = balanced_thousand(sample_rows(4000, 21, origin), 22);
    const auto& tmpl = default_classification_template();
    TempDir dir;
    const auto transcript = dir / "transcript.jsonl";

    // Record a run, then replay it ten times.
    std::string recorded;
    {
        MockBackend mock("hash-random", std::chrono::microseconds(0));
        TranscriptWriter writer(transcript);
        RecordingBackend rec(mock, writer);
        const auto results = classify_table(rec, table, tmpl, "recorded-model", 1);
        std::vector<VerdictResult> v;
        for (const auto& r : results) v.push_back(r.verdict);
        recorded = to_json(evaluate_verdicts(v, table.labels()));
    }
    std::size_t identical = 0;
    for (int i = 0; i < 10; ++i) {
        ReplayBackend replay(transcript);
        const auto results = classify_table(replay, table, tmpl, "recorded-model", 1);
        std::vector<VerdictResult> v;
        for (const auto& r : results) v.push_back(r.verdict);
        identical += to_json(evaluate_verdicts(v, table.labels())) == recorded;
    }

    MockBackend benign("always:0", std::chrono::microseconds(0));
    const auto results = classify_table(benign, table, tmpl, "all-benign", 1);
    std::vector<VerdictResult> v;
    for (const auto& r : results) v.push_back(r.verdict);
    const auto report = evaluate_verdicts(v, table.labels());

    Outcome o;
    o.pass = identical == 10 && report.macro_recall == 0.5 && report.macro_precision == 0.25 &&
             report.zero_division;
    o.detail = std::to_string(identical) + "/10 replays bit-identical; all-benign on " +
               std::to_string(table.size()) + " " + origin + " flows: macro_recall " +
               fmt(report.macro_recall, 3) + ", macro_precision " + fmt(report.macro_precision, 3);
    return o;
}

// ---- C3: random forest on NF-UNSW-NB15-v2 ----

Outcome c3() {
    const auto path = dataset_path();
    if (!path)
        return {false,
                "dataset not available: set NIDSLLM_UNSW_NB15_V2_CSV or place "
                "data/NF-UNSW-NB15-v2.csv; random forest on a 100k stratified subsample not run"};
    const auto start = Clock::now();
    const auto full = load_dataset(*path, builtin_schema(kUnswNb15V2));
    const auto table = subsample(full, std::min<std::size_t>(100000, full.size()), true, 31);
    const auto split = stratified_split(table, {0.05, "", 32});
    BaselineModel model;
    model.encoder = FeatureEncoder::fit(split.train, {});
    ForestParams params;
    params.seed = 33;
    model.model = train_random_forest(model.encoder.transform(split.train), split.train.labels(), params);
    const auto report = macro_metrics(confusion(model.predict(split.test), split.test.labels()));
    const double took = seconds_since(start);

    Outcome o;
    o.pass = report.weighted_f1 >= 0.90 && took <= 600.0;
    o.detail = "weighted F1 " + fmt(report.weighted_f1) + " on " + std::to_string(split.test.size()) +
               " test rows, " + fmt(took, 1) + " s";
    return o;
}

// ---- C4: latency harness ----

Outcome c4() {
    std::string origin;
    const auto rows = sample_rows(20000, 41, origin);
    const auto split = stratified_split(rows, {0.5, "", 42});
    std::vector<std::size_t> first(std::min<std::size_t>(10000, split.test.size()));
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
    const auto batch = split.test.select(first, "bench");

    // (a) injected delay
    MockBackend mock("always:0", std::chrono::microseconds(14000));
    std::vector<std::size_t> twenty(20);
    for (std::size_t i = 0; i < twenty.size(); ++i) twenty[i] = i;
    const auto mock_report = benchmark_backend(mock, batch.select(twenty, "mock"),
                                               default_classification_template(), "mock",
                                               8030000000ULL);
    const bool a = std::abs(mock_report.mean_us - 14000.0) <= 1400.0;

    // (b) trained baselines on the batch
    BaselineModel dt, rf;
    dt.encoder = rf.encoder = FeatureEncoder::fit(split.train, {});
    const auto x = dt.encoder.transform(split.train);
    const auto y = split.train.labels();
    dt.model = train_decision_tree(x, y, {.seed = 43});
    ForestParams fp;
    fp.seed = 44;
    rf.model = train_random_forest(x, y, fp);
    const auto dt_report = benchmark_baseline(dt, batch);
    const auto rf_report = benchmark_baseline(rf, batch);
    const bool b = batch.size() == 10000 && dt_report.mean_us < 100.0 && rf_report.mean_us < 500.0;

    // (c) run accounting
    int calls = 0;
    const auto counted = benchmark_latency("counter", 0, 1, [&] { ++calls; });
    auto exact = [](const LatencyReport& r) {
        return r.runs == 10 && r.warmup_runs == 1 && r.samples_us.size() == 10;
    };
    const bool c = calls == 11 && exact(counted) && exact(mock_report) && exact(dt_report) &&
                   exact(rf_report);

    Outcome o;
    o.pass = a && b && c;
    o.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " mock mean " + fmt(mock_report.mean_us, 1) +
               " us; (b) " + (b ? "ok" : "FAIL") + " dt " + fmt(dt_report.mean_us, 3) + " us, rf " +
               fmt(rf_report.mean_us, 3) + " us per sample on " + std::to_string(batch.size()) +
               " " + origin + " rows; (c) " + (c ? "ok" : "FAIL") + " " + std::to_string(calls) +
               " batch calls, 10 timed";
    return o;
}

// ---- C5: fine-tune corpora ----

Outcome c5() {
    std::string origin;
    const auto train = sample_rows(60000, 51, origin);
    std::map<std::size_t, int> label_of;
    for (const auto& r : train) label_of[r.source_row()] = r.label();
    const auto& tmpl = default_classification_template();
    TempDir dir;

    std::vector<std::string> failures;
    for (std::size_t budget : {1000u, 10000u, 50000u}) {
        const auto tag = std::to_string(budget);
        CorpusManifest base;
        base.dataset_id = train.schema().id;
        base.budget = budget;
        base.seed = 52;
        base.template_version = tmpl.id;

        // ORPO: exact size, label-correct after a round trip, byte-stable.
        const auto pairs = build_orpo_pairs(train, tmpl, budget, 52);
        base.method = CorpusMethod::orpo;
        const auto orpo_a = dir / ("orpo-a-" + tag + ".jsonl");
        const auto orpo_b = dir / ("orpo-b-" + tag + ".jsonl");
        export_jsonl(pairs, describe_corpus(pairs, train, base), orpo_a);
        const auto again = build_orpo_pairs(train, tmpl, budget, 52);
        export_jsonl(again, describe_corpus(again, train, base), orpo_b);
        const auto back = read_orpo_jsonl(orpo_a);
        std::size_t wrong = 0;
        for (const auto& p : back) {
            const int y = label_of.at(p.source_row);
            wrong += p.accepted != std::to_string(y) || p.rejected != std::to_string(1 - y);
        }
        if (back.size() != budget) failures.push_back("orpo " + tag + " has " + std::to_string(back.size()) + " rows");
        if (wrong) failures.push_back("orpo " + tag + ": " + std::to_string(wrong) + " label errors");
        if (!audit_export(orpo_a, train).ok()) failures.push_back("orpo " + tag + " audit");
        if (read_file(orpo_a) != read_file(orpo_b)) failures.push_back("orpo " + tag + " not byte-identical");

        // KTO: ceil/floor relevance split, byte-stable.
        const auto examples = build_kto_examples(train, tmpl, budget, 52);
        base.method = CorpusMethod::kto;
        const auto kto_a = dir / ("kto-a-" + tag + ".jsonl");
        const auto kto_b = dir / ("kto-b-" + tag + ".jsonl");
        export_jsonl(examples, describe_corpus(examples, train, base), kto_a);
        const auto again_kto = build_kto_examples(train, tmpl, budget, 52);
        export_jsonl(again_kto, describe_corpus(again_kto, train, base), kto_b);
        const auto kto_back = read_kto_jsonl(kto_a);
        std::size_t relevant = 0, kto_wrong = 0;
        for (const auto& e : kto_back) {
            relevant += e.relevant;
            const bool matches = e.response == std::to_string(label_of.at(e.source_row));
            kto_wrong += matches != e.relevant;
        }
        const std::size_t irrelevant = kto_back.size() - relevant;
        if (relevant != (budget + 1) / 2 || irrelevant != budget / 2)
            failures.push_back("kto " + tag + " split " + std::to_string(relevant) + "/" +
                               std::to_string(irrelevant));
        if (kto_wrong) failures.push_back("kto " + tag + ": " + std::to_string(kto_wrong) + " relevance errors");
        if (!audit_export(kto_a, train).ok()) failures.push_back("kto " + tag + " audit");
        if (read_file(kto_a) != read_file(kto_b)) failures.push_back("kto " + tag + " not byte-identical");
    }

    Outcome o;
    o.pass = failures.empty();
    o.detail = "budgets 1000/10000/50000 over " + std::to_string(train.size()) + " " + origin + " rows";
    for (const auto& f : failures) o.detail += "; " + f;
    return o;
}

// ---- C6: codec contract ----

std::string reference_encoding(const FlowRecord& r) {
    std::string out;
    const auto& names = r.schema().feature_names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i] + ": " + std::string(r.value(i));
    }
    return out;
}

// Reference verdict rule: 0/1 strict, 0/1 lenient, or -1 for a failure.
std::pair<int, bool> reference_verdict(const std::string& s) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    const auto core = s.substr(b, e - b);
    if (core == "0" || core == "1") return {core[0] - '0', false};
    if (core.empty() || (core[0] != '0' && core[0] != '1')) return {-1, false};
    const auto digits = std::count_if(s.begin(), s.end(),
                                      [](char c) { return c >= '0' && c <= '9'; });
    return digits == 1 ? std::pair{core[0] - '0', true} : std::pair{-1, false};
}

Outcome c6() {
    std::string origin;
    const auto rows = sample_rows(10000, 61, origin);
    std::size_t encode_bad = 0;
    for (const auto& r : rows) encode_bad += encode_flow(r) != reference_encoding(r);

    static const std::vector<std::string> pieces = {"0", "1", "2", "9", " ", "\n", "\t", ".",
                                                    "malicious", "benign", "Answer:", "01", "10",
                                                    "The flow is", "yes", "-", "1.0", "x"};
    Rng rng(62);
    std::size_t verdict_bad = 0, cases = 0, strict = 0, lenient = 0, failed = 0;
    auto probe = [&](const std::string& s) {
        ++cases;
        const auto [want, want_lenient] = reference_verdict(s);
        const auto got = parse_binary_verdict(s);
        if (want < 0) {
            ++failed;
            const auto* f = std::get_if<ParseFailure>(&got);
            verdict_bad += !(f && f->raw_completion == s);
        } else {
            (want_lenient ? lenient : strict) += 1;
            const auto* v = std::get_if<Verdict>(&got);
            verdict_bad += !(v && v->value == want && v->lenient == want_lenient);
        }
    };
    for (const auto* fixed : {"1", "0", " 1\n", "\t0 ", "", "The flow is malicious.", "2", "11",
                              "1 (malicious)", "0 benign", "1 or 0", "yes"})
        probe(fixed);
    while (cases < 5000) {
        std::string s;
        const auto parts = rng.below(5);
        for (std::size_t i = 0; i < parts; ++i) s += pieces[rng.below(pieces.size())];
        probe(s);
    }

    Outcome o;
    o.pass = encode_bad == 0 && verdict_bad == 0 && cases >= 1000 && rows.size() == 10000;
    o.detail = std::to_string(rows.size()) + " " + origin + " rows, " + std::to_string(encode_bad) +
               " encoding mismatches; " + std::to_string(cases) + " verdict cases (" +
               std::to_string(strict) + " strict, " + std::to_string(lenient) + " lenient, " +
               std::to_string(failed) + " failures), " + std::to_string(verdict_bad) + " mismatches";
    return o;
}

// ---- C7: fact-check fixtures ----

Outcome c7() {
    const auto& reg = ProtocolRegistry::builtin();
    auto findings = [&](std::string_view text, const FlowRecord& flow) {
        return fact_check(extract_claims(text), flow, reg);
    };
    auto first = [](const std::vector<FactCheckFinding>& fs, ClaimKind kind) -> const FactCheckFinding* {
        for (const auto& f : fs)
            if (f.claim.kind == kind) return &f;
        return nullptr;
    };
    auto noted = [](const FactCheckFinding& f, std::string_view s) {
        return std::any_of(f.notes.begin(), f.notes.end(),
                           [&](const std::string& n) { return n.find(s) != std::string::npos; });
    };
    std::vector<std::string> results;
    int passed = 0;
    auto record = [&](const char* name, bool ok) {
        passed += ok;
        results.push_back(std::string(name) + (ok ? " ok" : " FAIL"));
    };

    {
        const auto fs = findings("The protocol 17 is UDP.", unsw_flow({{"PROTOCOL", "17"}}));
        const auto* f = first(fs, ClaimKind::protocol_name);
        record("(a)", f && f->status == FindingStatus::supported);
    }
    {
        const auto fs = findings("The protocol 139 is NetBIOS.",
                                 unsw_flow({{"PROTOCOL", "139"}}, 1, "Exploits"));
        const auto* f = first(fs, ClaimKind::protocol_name);
        record("(b)", f && f->status == FindingStatus::contradicted_by_registry &&
                          f->evidence.find("Host Identity Protocol") != std::string::npos);
    }
    {
        const auto fs = findings("The destination port is 53, which is the standard port for DNS traffic.",
                                 unsw_flow({{"PROTOCOL", "17"}, {"L4_DST_PORT", "53"}}));
        const auto* f = first(fs, ClaimKind::port_service);
        record("(c)", f && f->status == FindingStatus::supported);
    }
    {
        bool ok = true;
        for (const auto* text : {"The destination port is 0, which is unusual.",
                                 "The source port is 0, which indicates malicious activity."}) {
            const auto fs = findings(text, unsw_flow({{"PROTOCOL", "1"}, {"L4_SRC_PORT", "0"},
                                                      {"L4_DST_PORT", "0"}},
                                                     1, "Reconnaissance"));
            const auto* f = first(fs, ClaimKind::port_service);
            ok = ok && f && f->status != FindingStatus::contradicted_by_flow &&
                 f->status != FindingStatus::contradicted_by_registry &&
                 noted(*f, "unusual but legitimate");
        }
        record("(d)", ok);
    }
    {
        const auto fs = findings(dns_explanation(), dns_flow());
        bool any = false, ok = true;
        for (const auto& f : fs)
            if (f.claim.kind == ClaimKind::location) {
                any = true;
                ok = ok && f.status == FindingStatus::unverifiable;
            }
        record("(e)", any && ok);
    }

    Outcome o;
    o.pass = passed == 5;
    o.detail = std::to_string(passed) + "/5 fixtures:";
    for (const auto& r : results) o.detail += " " + r;
    return o;
}

// ---- C8: stratification properties ----

std::map<std::string, std::size_t> attack_counts(const FlowTable& t) {
    std::map<std::string, std::size_t> out;
    for (const auto& r : t) ++out[r.attack_type()];
    return out;
}

Outcome c8() {
    const std::size_t instances = 200;
    std::size_t violations = 0, impure = 0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        Rng gen(Rng::derive(0xacce, inst));
        const std::size_t strata = 1 + gen.below(7);
        std::vector<std::size_t> sizes;
        for (std::size_t s = 0; s < strata; ++s) sizes.push_back(1 + gen.below(150));
        const auto t = strata_table(sizes, 1 + gen.below(5));
        const std::size_t n = t.size();
        const auto seed = gen.next();
        auto name_of = [](std::size_t s) { return s == 0 ? std::string("Benign") : "S" + std::to_string(s); };
        auto within = [](std::size_t got, double exact) {
            return std::abs(static_cast<double>(got) - exact) <= 1.0 + 1e-9;
        };

        // split
        const double f = 0.01 + 0.9 * gen.unit();
        const SplitSpec spec{f, "", seed};
        const auto idx = stratified_split_indices(t, spec);
        const auto test_counts = attack_counts(t.select(idx.test, "t"));
        for (std::size_t s = 0; s < strata; ++s) {
            const auto it = test_counts.find(name_of(s));
            violations += !within(it == test_counts.end() ? 0 : it->second, f * sizes[s]);
        }
        violations += idx.train.size() + idx.test.size() != n;
        const auto idx2 = stratified_split_indices(t, spec);
        impure += idx2.train != idx.train || idx2.test != idx.test;

        // folds
        if (n >= 2) {
            const int k = static_cast<int>(2 + gen.below(std::min<std::size_t>(n - 1, 9)));
            const auto folds = kfold_indices(t, k, seed);
            std::set<std::size_t> seen;
            for (const auto& fold : folds) {
                const auto counts = attack_counts(t.select(fold, "f"));
                for (std::size_t s = 0; s < strata; ++s) {
                    const auto it = counts.find(name_of(s));
                    violations += !within(it == counts.end() ? 0 : it->second,
                                          static_cast<double>(sizes[s]) / k);
                }
                seen.insert(fold.begin(), fold.end());
            }
            violations += seen.size() != n;
            impure += kfold_indices(t, k, seed) != folds;
        }

        // subsample
        const std::size_t m = gen.below(n + 1);
        const auto sub = subsample_indices(t, m, true, seed);
        const auto sub_counts = attack_counts(t.select(sub, "s"));
        for (std::size_t s = 0; s < strata; ++s) {
            const auto it = sub_counts.find(name_of(s));
            violations += !within(it == sub_counts.end() ? 0 : it->second,
                                  static_cast<double>(m) * sizes[s] / n);
        }
        violations += sub.size() != m;
        impure += subsample_indices(t, m, true, seed) != sub;
    }
    Outcome o;
    o.pass = violations == 0 && impure == 0;
    o.detail = std::to_string(instances) + " random instances, " + std::to_string(violations) +
               " quota violations, " + std::to_string(impure) + " seed-purity failures";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> checks = {c1, c2, c3, c4, c5, c6, c7, c8};
    std::vector<int> selected;
    if (argc > 1) {
        const int n = std::atoi(argv[1]);
        if (n < 1 || n > static_cast<int>(checks.size())) {
            std::cerr << "usage: " << argv[0] << " [1-" << checks.size() << "]\n";
            return 2;
        }
        selected.push_back(n);
    } else {
        for (int i = 1; i <= static_cast<int>(checks.size()); ++i) selected.push_back(i);
    }
    bool all = true;
    for (int n : selected) {
        Outcome o;
        try {
            o = checks[static_cast<std::size_t>(n - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << "C" << n << (o.pass ? " PASS: " : " FAIL: ") << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
