#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "nidsllm/baselines.hpp"
#include "nidsllm/evaluation.hpp"
#include "nidsllm/explain.hpp"
#include "nidsllm/prompt_codec.hpp"

using namespace nidsllm;

namespace {

const FlowTable& flows() {
    static const FlowTable table = testing::synthetic_flows({.rows = 10000, .overlap = 0.05, .seed = 5});
    return table;
}

struct Trained {
    BaselineModel dt, rf;
    NumericMatrix batch;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained out;
        const auto& table = flows();
        out.dt.encoder = out.rf.encoder = FeatureEncoder::fit(table);
        const auto x = out.dt.encoder.transform(table);
        const auto y = table.labels();
        out.dt.model = train_decision_tree(x, y, {.seed = 1});
        ForestParams p;
        p.seed = 2;
        out.rf.model = train_random_forest(x, y, p);
        out.batch = x;
        return out;
    }();
    return t;
}

void BM_EncodeFlow(benchmark::State& state) {
    const auto& table = flows();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_flow(table[i]));
        i = (i + 1) % table.size();
    }
}
BENCHMARK(BM_EncodeFlow);

void BM_ParseVerdict(benchmark::State& state) {
    const std::string completions[] = {"1", " 0\n", "1 (malicious)", "The flow is benign."};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_binary_verdict(completions[i++ % 4]));
    }
}
BENCHMARK(BM_ParseVerdict);

void BM_MacroMetrics(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<int> pred(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
        label[i] = static_cast<int>(i % 2);
        pred[i] = static_cast<int>((i / 3) % 2);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(macro_metrics(confusion(std::span<const int>(pred),
                                                         std::span<const int>(label))));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MacroMetrics)->Arg(1000)->Arg(100000);

void BM_TreePredictBatch(benchmark::State& state) {
    const auto& t = trained();
    for (auto _ : state) benchmark::DoNotOptimize(t.dt.predict(t.batch));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(flows().size()));
}
BENCHMARK(BM_TreePredictBatch)->Unit(benchmark::kMillisecond);

void BM_ForestPredictBatch(benchmark::State& state) {
    const auto& t = trained();
    for (auto _ : state) benchmark::DoNotOptimize(t.rf.predict(t.batch));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(flows().size()));
}
BENCHMARK(BM_ForestPredictBatch)->Unit(benchmark::kMillisecond);

void BM_ExtractClaims(benchmark::State& state) {
    const auto text = testing::dns_explanation();
    for (auto _ : state) benchmark::DoNotOptimize(extract_claims(text));
}
BENCHMARK(BM_ExtractClaims);

void BM_FactCheck(benchmark::State& state) {
    const auto claims = extract_claims(testing::dns_explanation());
    const auto flow = testing::dns_flow();
    const auto& registry = ProtocolRegistry::builtin();
    for (auto _ : state) benchmark::DoNotOptimize(fact_check(claims, flow, registry));
}
BENCHMARK(BM_FactCheck);

}  // namespace

BENCHMARK_MAIN();
