#include "fixtures.hpp"

#include "priorpull/error.hpp"
#include "priorpull/sampling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace priorpull;
using fixtures::TempDir;

namespace {

MultilabelDataset pool_of(std::size_t n, std::uint64_t seed = 11) {
    Rng rng(seed);
    return fixtures::random_dataset(rng, n, fixtures::semeval_taxonomy(), "p", Split::train);
}

std::vector<std::string> ids(const std::vector<Demonstration>& demos) {
    std::vector<std::string> out;
    for (const auto& d : demos) out.push_back(d.example_id);
    return out;
}

} // namespace

TEST(SampleIcl, DeterministicDistinctGoldLabelled) {
    const auto pool = pool_of(50);
    const auto a = sample_icl(pool, 5, 42);
    EXPECT_EQ(a, sample_icl(pool, 5, 42));
    ASSERT_EQ(a.size(), 5u);
    const auto picked = ids(a);
    std::set<std::string> seen(picked.begin(), picked.end());
    EXPECT_EQ(seen.size(), 5u);
    for (const auto& d : a) {
        const auto* ex = pool.find(d.example_id);
        ASSERT_NE(ex, nullptr);
        EXPECT_EQ(d.text, ex->text);
        EXPECT_EQ(d.shown_labels, ex->gold);
    }
    EXPECT_NE(ids(a), ids(sample_icl(pool, 5, 43)));
}

TEST(SampleIcl, ZeroShotAndFullPermutation) {
    const auto pool = pool_of(12);
    EXPECT_TRUE(sample_icl(pool, 0, 1).empty());
    auto all = ids(sample_icl(pool, pool.size(), 3));
    std::vector<std::string> expected;
    for (const auto& ex : pool.examples()) expected.push_back(ex.id);
    std::sort(all.begin(), all.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(all, expected);
}

TEST(SampleIcl, ExcludesQueryAndRejectsSmallPool) {
    const auto pool = pool_of(6);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto d = sample_icl(pool, 5, seed, std::string_view("p-2"));
        for (const auto& demo : d) EXPECT_NE(demo.example_id, "p-2");
    }
    EXPECT_THROW(sample_icl(pool, 6, 1, std::string_view("p-0")), SamplingError);
    EXPECT_THROW(sample_icl(pool, 7, 1), SamplingError);
}

TEST(Sampling, SchemesShareTextsForMatchedSeeds) {
    const auto pool = pool_of(80);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto icl = sample_icl(pool, 15, seed, std::string_view("p-7"));
        const auto ind = sample_prior_independent(pool, 15, seed, std::string_view("p-7"));
        const auto uni = sample_prior_uniform(pool, 15, seed, std::string_view("p-7"));
        EXPECT_EQ(ids(icl), ids(ind));
        EXPECT_EQ(ids(icl), ids(uni));
        for (std::size_t i = 0; i < icl.size(); ++i) {
            EXPECT_EQ(icl[i].text, ind[i].text);
            EXPECT_EQ(icl[i].text, uni[i].text);
        }
    }
}

TEST(PriorIndependent, LabelSetsComeFromPoolGoldSets) {
    const auto pool = pool_of(30);
    std::set<std::uint64_t> gold_sets;
    for (const auto& ex : pool.examples()) gold_sets.insert(ex.gold.bits());
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        for (const auto& d : sample_prior_independent(pool, 10, seed))
            EXPECT_TRUE(gold_sets.count(d.shown_labels.bits())) << d.example_id;
}

TEST(PriorIndependent, ConstantGoldMatchesIcl) {
    const auto t = fixtures::semeval_taxonomy();
    std::vector<LabeledExample> ex;
    for (int i = 0; i < 20; ++i) ex.push_back({"c" + std::to_string(i), "t" + std::to_string(i), LabelSet::from_bits(5)});
    MultilabelDataset pool(t, Split::train, ex);
    EXPECT_EQ(sample_prior_independent(pool, 8, 4), sample_icl(pool, 8, 4));
}

TEST(PriorIndependent, FrequenciesTrackPoolDistribution) {
    // Four distinct gold sets with frequencies 1/2, 1/4, 1/8, 1/8.
    const auto t = fixtures::semeval_taxonomy();
    std::vector<LabeledExample> ex;
    const std::uint64_t sets[] = {1, 1, 1, 1, 2, 2, 4, 8};
    for (int i = 0; i < 8; ++i) ex.push_back({"q" + std::to_string(i), "text", LabelSet::from_bits(sets[i])});
    MultilabelDataset pool(t, Split::train, ex);
    std::map<std::uint64_t, int> counts;
    const int draws = 1000;
    for (int s = 0; s < draws; ++s) counts[sample_prior_independent(pool, 1, s).front().shown_labels.bits()]++;
    for (auto [bits, p] : std::map<std::uint64_t, double>{{1, 0.5}, {2, 0.25}, {4, 0.125}, {8, 0.125}}) {
        const double sigma = std::sqrt(draws * p * (1 - p));
        EXPECT_NEAR(counts[bits], draws * p, 3 * sigma) << bits;
    }
}

TEST(PriorUniform, MeanSetSizeNearHalfTaxonomy) {
    const auto pool = pool_of(40);
    double total = 0.0;
    int n = 0;
    for (std::uint64_t seed = 0; n < 1000; ++seed)
        for (const auto& d : sample_prior_uniform(pool, 10, seed)) {
            total += static_cast<double>(d.shown_labels.size());
            ++n;
        }
    const double sigma_mean = std::sqrt(11 * 0.25 / n);
    EXPECT_NEAR(total / n, 5.5, 3 * sigma_mean);
    EXPECT_EQ(sample_prior_uniform(pool, 10, 9), sample_prior_uniform(pool, 10, 9));
}

TEST(PriorUniform, SingleLabelTaxonomyIsAFairCoin) {
    EmotionTaxonomy t("one", {"joy"});
    std::vector<LabeledExample> ex;
    for (int i = 0; i < 10; ++i) ex.push_back({"s" + std::to_string(i), "x", LabelSet{}});
    MultilabelDataset pool(t, Split::train, ex);
    int on = 0;
    for (int s = 0; s < 1000; ++s) on += !sample_prior_uniform(pool, 1, s).front().shown_labels.empty();
    EXPECT_NEAR(on, 500, 3 * std::sqrt(250.0));
}

TEST(Sedl, SameTextsDifferentLabels) {
    const auto pool = pool_of(60);
    for (auto mode : {LabelMode::independent, LabelMode::uniform}) {
        const auto r0 = sample_sedl(pool, 10, 5, 0, mode);
        const auto r1 = sample_sedl(pool, 10, 5, 1, mode);
        const auto r2 = sample_sedl(pool, 10, 5, 2, mode);
        EXPECT_EQ(ids(r0), ids(r1));
        EXPECT_EQ(ids(r0), ids(r2));
        auto labels = [](const std::vector<Demonstration>& d) {
            std::vector<std::uint64_t> out;
            for (const auto& x : d) out.push_back(x.shown_labels.bits());
            return out;
        };
        EXPECT_NE(labels(r0), labels(r1));
        EXPECT_NE(labels(r1), labels(r2));
    }
    EXPECT_EQ(sample_sedl(pool, 10, 5, 0, LabelMode::independent), sample_prior_independent(pool, 10, 5));
    EXPECT_EQ(sample_sedl(pool, 10, 5, 0, LabelMode::uniform), sample_prior_uniform(pool, 10, 5));
}

TEST(PriorPrompt, UsesSourcePredictions) {
    const auto pool = pool_of(40);
    EXPECT_EQ(sample_prior_prompt(pool, 6, 8, PredictionMap::from_gold(pool)), sample_icl(pool, 6, 8));
    Rng rng(4);
    std::vector<PredictionMap> runs;
    for (int r = 0; r < 3; ++r) {
        std::map<std::string, LabelSet> entries;
        for (const auto& ex : pool.examples()) entries[ex.id] = LabelSet::from_bits(uniform_below(rng, 2048));
        runs.emplace_back(pool.taxonomy(), entries);
    }
    std::vector<std::vector<Demonstration>> lists;
    for (const auto& run : runs) {
        const auto demos = sample_prior_prompt(pool, 6, 8, run);
        for (const auto& d : demos) EXPECT_EQ(d.shown_labels, run.at(d.example_id));
        lists.push_back(demos);
    }
    EXPECT_EQ(ids(lists[0]), ids(lists[1]));
    EXPECT_EQ(ids(lists[0]), ids(lists[2]));
    EXPECT_NE(lists[0], lists[1]);
}

TEST(PriorPrompt, MissingPredictionFails) {
    const auto pool = pool_of(10);
    PredictionMap partial(pool.taxonomy(), {{"p-0", LabelSet{}}});
    EXPECT_THROW(sample_prior_prompt(pool, 5, 1, partial), SamplingError);
}

TEST(Scheme, Validation) {
    EXPECT_THROW((SamplingScheme{SchemeKind::icl, true, std::nullopt}.validate()), SamplingError);
    EXPECT_THROW((SamplingScheme{SchemeKind::prior_prompt, false, std::nullopt}.validate()), SamplingError);
    EXPECT_NO_THROW((SamplingScheme{SchemeKind::prior_uniform, true, std::nullopt}.validate()));
    EXPECT_NO_THROW(
        (SamplingScheme{SchemeKind::prior_prompt, false, LabelSourceRef{SchemeKind::zero_shot, 0, false}}.validate()));
    EXPECT_THROW(
        (SamplingScheme{SchemeKind::prior_prompt, false, LabelSourceRef{SchemeKind::icl, 5, false}}.validate()),
        SamplingError);
    EXPECT_THROW(parse_scheme_kind("bogus"), SamplingError);
}

TEST(Retrieval, EqualVectorRanksFirstAndTiesById) {
    const auto t = fixtures::semeval_taxonomy();
    MultilabelDataset pool(t, Split::train,
                           {{"a", "x", LabelSet{}}, {"b", "x", LabelSet{}}, {"c", "x", LabelSet{}}, {"d", "x", LabelSet{}}});
    EmbeddingStore store;
    store.add("q", {1, 2, 3});
    store.add("a", {0, 1, 0});
    store.add("b", {1, 2, 3});
    store.add("c", {0, 0, 1});
    store.add("d", {0, 0, 1});
    LabeledExample q{"q", "query", LabelSet{}};
    const auto first = retrieve_similar(q, pool, store, 3, RetrievalOrder::most_similar_first);
    EXPECT_EQ(ids(first), (std::vector<std::string>{"b", "c", "d"}));  // c and d tie; c < d
    const auto last = retrieve_similar(q, pool, store, 3);
    EXPECT_EQ(ids(last), (std::vector<std::string>{"d", "c", "b"}));
}

TEST(Retrieval, OrthogonalVectorsLose) {
    const auto t = fixtures::semeval_taxonomy();
    std::vector<LabeledExample> ex;
    EmbeddingStore store;
    store.add("q", {1, 1, 0, 0, 0});
    for (int i = 0; i < 5; ++i) {
        ex.push_back({"e" + std::to_string(i), "t", LabelSet{}});
        std::vector<double> v(5, 0.0);
        v[i] = 1.0;
        store.add("e" + std::to_string(i), v);
    }
    MultilabelDataset pool(t, Split::train, ex);
    auto got = ids(retrieve_similar({"q", "", LabelSet{}}, pool, store, 2));
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, (std::vector<std::string>{"e0", "e1"}));
}

TEST(Retrieval, ErrorsAndQueryExclusion) {
    const auto t = fixtures::semeval_taxonomy();
    MultilabelDataset pool(t, Split::train, {{"q", "x", LabelSet{}}, {"a", "y", LabelSet{}}});
    EmbeddingStore store;
    store.add("q", {1, 0});
    store.add("a", {0, 0});
    EXPECT_THROW(retrieve_similar(pool[0], pool, store, 1), SamplingError);
    store.add("a", {1, 1});
    const auto d = retrieve_similar(pool[0], pool, store, 1);
    EXPECT_EQ(ids(d), std::vector<std::string>{"a"});
    EXPECT_THROW(retrieve_similar(pool[0], pool, store, 2), SamplingError);
    EmbeddingStore missing;
    missing.add("q", {1, 0});
    EXPECT_THROW(retrieve_similar(pool[0], pool, missing, 1), SamplingError);
    EXPECT_THROW(store.add("bad", {1, 2, 3}), SamplingError);
}

TEST(Embeddings, FileRoundTrip) {
    TempDir dir;
    EmbeddingStore store;
    store.add("x", {0.5, -1.25});
    store.add("y", {3, 4});
    save_embeddings(dir / "e.jsonl", store);
    const auto back = load_embeddings(dir / "e.jsonl");
    EXPECT_EQ(back.entries(), store.entries());
}
