#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "nidsllm/errors.hpp"
#include "nidsllm/netflow_data.hpp"
#include "nidsllm/rng.hpp"

using namespace nidsllm;
using namespace nidsllm::testing;

namespace {

FlowTable parse(const std::string& csv, const DatasetSchema& schema) {
    std::istringstream in(csv);
    return parse_dataset(in, schema, "inline");
}

std::map<std::string, std::size_t> count_attacks(const FlowTable& t) {
    std::map<std::string, std::size_t> out;
    for (const auto& r : t) ++out[r.attack_type()];
    return out;
}

std::multiset<std::size_t> source_rows(const FlowTable& t) {
    std::multiset<std::size_t> out;
    for (const auto& r : t) out.insert(r.source_row());
    return out;
}

}  // namespace

TEST(Schema, BuiltinsValidate) {
    for (const auto& id : builtin_schema_ids()) {
        const auto s = builtin_schema(id);
        EXPECT_NO_THROW(s.validate());
        EXPECT_EQ(s.id, id);
        EXPECT_EQ(s.feature_names.size(), 43u);
    }
    EXPECT_THROW(builtin_schema("NF-nope"), SchemaError);
}

TEST(Schema, InvariantsRejected) {
    DatasetSchema s = numbered_schema(2);
    s.feature_names.push_back("F0");
    EXPECT_THROW(s.validate(), SchemaError);
    s = numbered_schema(0);
    EXPECT_THROW(s.validate(), SchemaError);
    s = numbered_schema(2);
    s.feature_names.push_back("Label");
    EXPECT_THROW(s.validate(), SchemaError);
}

TEST(Schema, FileFormat) {
    const auto s = parse_schema("# comment\nA\nB\n\nlabel=y\nattack=kind\n", "mine");
    EXPECT_EQ(s.feature_names, (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(s.label_column, "y");
    EXPECT_EQ(s.attack_column, "kind");
    EXPECT_EQ(s.id, "mine");
}

TEST(Schema, Without) {
    const auto s = builtin_schema(kUnswNb15V2);
    const std::vector<std::string> drop = {"IPV4_SRC_ADDR", "IPV4_DST_ADDR"};
    const auto t = s.without(drop);
    EXPECT_EQ(t.feature_names.size(), 41u);
    EXPECT_FALSE(t.index_of("IPV4_SRC_ADDR"));
    const std::vector<std::string> bogus = {"NOPE"};
    EXPECT_THROW(s.without(bogus), SchemaError);
}

TEST(Load, PortEightyRow) {
    const auto schema = numbered_schema(0);
    DatasetSchema s;
    s.id = "x";
    s.feature_names = {"L4_DST_PORT", "PROTOCOL"};
    const auto t = parse("PROTOCOL,Label,L4_DST_PORT,Attack,extra\n6,0,80,Benign,z\n", s);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].label(), 0);
    EXPECT_EQ(t[0].attack_type(), "Benign");
    EXPECT_EQ(t[0].find("L4_DST_PORT").value(), "80");
    EXPECT_EQ(t[0].value(0), "80");
    EXPECT_EQ(t[0].value(1), "6");
    (void)schema;
}

TEST(Load, HeaderOnlyIsNoRows) {
    const auto s = numbered_schema(1);
    try {
        parse("F0,Label,Attack\n", s);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("no rows"), std::string::npos);
    }
}

TEST(Load, MissingColumnNamed) {
    const auto s = numbered_schema(2);
    try {
        parse("F0,F1,Attack\n1,2,Benign\n", s);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("Label"), std::string::npos);
    }
}

TEST(Load, BadRowReportsOneBasedIndex) {
    const auto s = numbered_schema(1);
    try {
        parse("F0,Label,Attack\n1,0,Benign\n2,7,Benign\n", s);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse("F0,Label,Attack\n1,0\n", s), DataError);
}

TEST(Load, LabelAttackConsistency) {
    const auto s = numbered_schema(1);
    EXPECT_THROW(parse("F0,Label,Attack\n1,1,Benign\n", s), DataError);
    EXPECT_THROW(parse("F0,Label,Attack\n1,0,DoS\n", s), DataError);
}

TEST(Load, RawTextPreserved) {
    const auto s = numbered_schema(3);
    const auto t = parse("F0,F1,F2,Label,Attack\n007,1.50,\"a,b\",0,Benign\n", s);
    EXPECT_EQ(t[0].value(0), "007");
    EXPECT_EQ(t[0].value(1), "1.50");
    EXPECT_EQ(t[0].value(2), "a,b");
}

TEST(Load, WriteRoundTrip) {
    const auto t = synthetic_flows({.rows = 200, .seed = 4});
    std::ostringstream out;
    write_dataset(t, out);
    const auto back = parse(out.str(), t.schema());
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_TRUE(back[i].same_content(t[i]));
}

TEST(Load, FileErrors) {
    EXPECT_THROW(load_dataset("/nonexistent/x.csv", numbered_schema(1)), IoError);
}

TEST(Split, HandCountedQuotas) {
    const auto t = strata_table({900, 100});
    const auto tt = stratified_split(t, {0.05, "", 3});
    const auto c = count_attacks(tt.test);
    EXPECT_EQ(c.at("Benign"), 45u);
    EXPECT_EQ(c.at("S1"), 5u);
    EXPECT_EQ(tt.test.size(), 50u);
    EXPECT_EQ(tt.train.size(), 950u);
}

TEST(Split, SingleStratumOfTwenty) {
    const auto t = strata_table({20});
    EXPECT_EQ(stratified_split(t, {0.05, "", 1}).test.size(), 1u);
}

TEST(Split, DeterministicAndPartition) {
    const auto t = strata_table({50, 30, 20});
    const auto a = stratified_split_indices(t, {0.2, "", 99});
    const auto b = stratified_split_indices(t, {0.2, "", 99});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Split, FractionOutOfRange) {
    const auto t = strata_table({10});
    EXPECT_THROW(stratified_split(t, {0.0, "", 1}), ArgumentError);
    EXPECT_THROW(stratified_split(t, {1.0, "", 1}), ArgumentError);
    EXPECT_THROW(stratified_split(t, {0.3, "NOPE", 1}), SchemaError);
}

TEST(Split, ByLabelColumn) {
    const auto t = strata_table({40, 30, 30});
    const auto tt = stratified_split(t, {0.1, "Label", 2});
    std::size_t mal = 0;
    for (const auto& r : tt.test) mal += r.label();
    EXPECT_EQ(tt.test.size(), 10u);
    EXPECT_EQ(mal, 6u);
}

TEST(Quotas, LargestRemainderTieByName) {
    const std::vector<std::size_t> sizes = {1, 1, 1};
    const std::vector<std::string> names = {"c", "a", "b"};
    const auto q = allocate_quotas(sizes, names, 2);
    EXPECT_EQ(q, (std::vector<std::size_t>{0, 1, 1}));
    EXPECT_THROW(allocate_quotas(sizes, names, 4), ArgumentError);
}

TEST(Kfold, EvenDivision) {
    const auto t = strata_table({60, 40});
    const auto folds = kfold(t, 10, 5);
    ASSERT_EQ(folds.size(), 10u);
    for (const auto& f : folds) {
        EXPECT_EQ(f.test.size(), 10u);
        EXPECT_EQ(f.train.size(), 90u);
    }
}

TEST(Kfold, RemainderDistribution) {
    const auto t = strata_table({55, 50});
    const auto folds = kfold_indices(t, 10, 5);
    std::map<std::size_t, int> sizes;
    for (const auto& f : folds) ++sizes[f.size()];
    EXPECT_EQ(sizes[11], 5);
    EXPECT_EQ(sizes[10], 5);
}

TEST(Kfold, UnionIsTable) {
    const auto t = strata_table({33, 21, 9});
    std::vector<std::size_t> all;
    for (const auto& f : kfold_indices(t, 7, 11)) all.insert(all.end(), f.begin(), f.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), t.size());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Kfold, Errors) {
    const auto t = strata_table({5});
    EXPECT_THROW(kfold(t, 1, 0), ArgumentError);
    EXPECT_THROW(kfold(t, 6, 0), ArgumentError);
}

TEST(Subsample, Identity) {
    const auto t = strata_table({12, 8});
    const auto s = subsample(t, t.size(), true, 3);
    EXPECT_EQ(source_rows(s), source_rows(t));
}

TEST(Subsample, FiftyFiftyTen) {
    const auto t = strata_table({50, 50});
    const auto s = subsample(t, 10, true, 3);
    const auto c = count_attacks(s);
    EXPECT_EQ(c.at("Benign"), 5u);
    EXPECT_EQ(c.at("S1"), 5u);
}

TEST(Subsample, SeedSensitivity) {
    const auto t = strata_table({500, 500});
    int differing = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        differing += subsample_indices(t, 50, true, seed) != subsample_indices(t, 50, true, seed + 100);
    EXPECT_GT(differing, 0);
}

TEST(Subsample, Errors) {
    const auto t = strata_table({5});
    EXPECT_THROW(subsample(t, 6, false, 0), ArgumentError);
    EXPECT_EQ(subsample(t, 3, false, 0).size(), 3u);
}

// Randomized tables: quota invariant, row conservation and seed purity.
class StratificationProperty : public ::testing::TestWithParam<int> {};

TEST_P(StratificationProperty, Holds) {
    Rng gen(Rng::derive(0xfeed, static_cast<std::uint64_t>(GetParam())));
    const std::size_t strata = 1 + gen.below(6);
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < strata; ++s) sizes.push_back(1 + gen.below(120));
    const auto t = strata_table(sizes, 1 + gen.below(4));
    const double f = 0.01 + 0.9 * gen.unit();
    const auto seed = gen.next();

    const auto split = stratified_split(t, {f, "", seed});
    const auto test_counts = count_attacks(split.test);
    for (std::size_t s = 0; s < strata; ++s) {
        const auto name = s == 0 ? std::string("Benign") : "S" + std::to_string(s);
        const double exact = f * static_cast<double>(sizes[s]);
        const auto got = test_counts.contains(name) ? test_counts.at(name) : 0;
        EXPECT_GE(static_cast<double>(got), std::floor(exact) - 1e-9) << name;
        EXPECT_LE(static_cast<double>(got), std::ceil(exact) + 1e-9) << name;
    }
    auto both = source_rows(split.train);
    for (auto r : source_rows(split.test)) both.insert(r);
    EXPECT_EQ(both, source_rows(t));

    const auto n = t.size();
    const int k = static_cast<int>(2 + gen.below(std::min<std::size_t>(n - 1, 10)));
    if (static_cast<std::size_t>(k) <= n) {
        const auto folds = kfold_indices(t, k, seed);
        std::size_t lo = n, hi = 0;
        for (const auto& fold : folds) {
            lo = std::min(lo, fold.size());
            hi = std::max(hi, fold.size());
        }
        EXPECT_LE(hi - lo, 1u);
        EXPECT_EQ(folds, kfold_indices(t, k, seed));
    }

    const std::size_t m = gen.below(n + 1);
    const auto sub = subsample(t, m, true, seed);
    EXPECT_EQ(sub.size(), m);
    const auto sub_counts = count_attacks(sub);
    for (std::size_t s = 0; s < strata; ++s) {
        const auto name = s == 0 ? std::string("Benign") : "S" + std::to_string(s);
        const double exact = static_cast<double>(m) * static_cast<double>(sizes[s]) / static_cast<double>(n);
        const auto got = sub_counts.contains(name) ? sub_counts.at(name) : 0;
        EXPECT_LE(std::abs(static_cast<double>(got) - exact), 1.0) << name;
    }
    EXPECT_EQ(subsample_indices(t, m, true, seed), subsample_indices(t, m, true, seed));
    EXPECT_EQ(stratified_split_indices(t, {f, "", seed}).test,
              stratified_split_indices(t, {f, "", seed}).test);
}

INSTANTIATE_TEST_SUITE_P(Random, StratificationProperty, ::testing::Range(0, 40));
