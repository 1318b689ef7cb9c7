#include "fixtures.hpp"
#include "oracles.hpp"

#include "priorpull/error.hpp"
#include "priorpull/metrics.hpp"

#include <gtest/gtest.h>

using namespace priorpull;

namespace {

PredictionMap map_of(const EmotionTaxonomy& t, std::vector<std::pair<std::string, std::vector<std::string>>> rows) {
    std::map<std::string, LabelSet> entries;
    for (auto& [id, labels] : rows) entries[id] = make_label_set(t, labels);
    return PredictionMap(t, entries);
}

PredictionMap random_map(Rng& rng, const EmotionTaxonomy& t, std::size_t n) {
    std::map<std::string, LabelSet> entries;
    for (std::size_t i = 0; i < n; ++i)
        entries["e" + std::to_string(i)] = LabelSet::from_bits(uniform_below(rng, std::uint64_t{1} << t.size()));
    return PredictionMap(t, entries);
}

EmotionTaxonomy prefix_taxonomy(std::size_t labels) {
    const auto full = fixtures::semeval_taxonomy().labels();
    return EmotionTaxonomy("t", std::vector<std::string>(full.begin(), full.begin() + labels));
}

} // namespace

TEST(Jaccard, HandExamples) {
    EmotionTaxonomy t("t", {"anger", "joy", "love"});
    EXPECT_DOUBLE_EQ(jaccard_similarity(map_of(t, {{"e", {"joy", "love"}}}), map_of(t, {{"e", {"joy"}}})), 0.5);
    EXPECT_DOUBLE_EQ(jaccard_similarity(map_of(t, {{"e", {}}}), map_of(t, {{"e", {}}})), 1.0);
    const auto a = map_of(t, {{"x", {"anger"}}, {"y", {"joy", "love"}}});
    EXPECT_DOUBLE_EQ(jaccard_similarity(a, a), 1.0);
}

TEST(MicroF1, TwoExampleCase) {
    EmotionTaxonomy t("t", {"anger", "joy"});
    const auto a = map_of(t, {{"1", {"joy"}}, {"2", {"anger"}}});
    const auto b = map_of(t, {{"1", {"joy"}}, {"2", {"joy"}}});
    EXPECT_DOUBLE_EQ(micro_f1(a, b), 0.5);
    EXPECT_DOUBLE_EQ(micro_f1(b, a), 0.5);
    EXPECT_DOUBLE_EQ(metric_triple(a, b).micro_f1, 0.5);
    EXPECT_DOUBLE_EQ(micro_f1(a, a), 1.0);
    const auto empty = map_of(t, {{"1", {}}, {"2", {}}});
    EXPECT_DOUBLE_EQ(micro_f1(empty, empty), 1.0);
}

TEST(MacroF1, ZeroDenominatorLabelScoresZero) {
    EmotionTaxonomy t("t", {"x", "y"});
    EXPECT_DOUBLE_EQ(macro_f1(map_of(t, {{"e", {"x"}}}), map_of(t, {{"e", {"x"}}})), 0.5);
    const auto full = map_of(t, {{"1", {"x"}}, {"2", {"y"}}});
    EXPECT_DOUBLE_EQ(macro_f1(full, full), 1.0);
}

TEST(MacroF1, SelfScoreCountsOccurringLabels) {
    Rng rng(77);
    const auto t = fixtures::semeval_taxonomy();
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_map(rng, t, 1 + uniform_below(rng, 4));
        std::size_t occurring = 0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            bool seen = false;
            for (const auto& [id, s] : a.entries()) seen = seen || s.contains(j);
            occurring += seen;
        }
        EXPECT_DOUBLE_EQ(macro_f1(a, a), static_cast<double>(occurring) / static_cast<double>(t.size()));
    }
}

TEST(MetricTriple, IdentityAndDisjoint) {
    EmotionTaxonomy t("t", {"a", "b"});
    const auto a = map_of(t, {{"1", {"a"}}, {"2", {"b"}}});
    const auto b = map_of(t, {{"1", {"b"}}, {"2", {"a"}}});
    EXPECT_EQ(metric_triple(a, a), (MetricTriple{1.0, 1.0, 1.0}));
    EXPECT_EQ(metric_triple(a, b), (MetricTriple{0.0, 0.0, 0.0}));
}

TEST(Alignment, StrictMismatchThrowsPartialScoresIntersection) {
    EmotionTaxonomy t("t", {"a", "b"});
    const auto a = map_of(t, {{"1", {"a"}}, {"2", {"b"}}});
    const auto b = map_of(t, {{"1", {"a"}}, {"3", {"b"}}});
    EXPECT_THROW(jaccard_similarity(a, b), AlignmentError);
    EXPECT_THROW(micro_f1(a, b), AlignmentError);
    EXPECT_DOUBLE_EQ(jaccard_similarity(a, b, Alignment::allow_partial), 1.0);
    EXPECT_THROW(metric_triple(a, PredictionMap(EmotionTaxonomy("u", {"a", "c"}), {})), AlignmentError);
}

TEST(Metrics, BruteForceOracleEquivalence) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = prefix_taxonomy(1 + uniform_below(rng, 11));
        const std::size_t n = uniform_below(rng, 21);
        const auto a = random_map(rng, t, n);
        const auto b = random_map(rng, t, n);
        const auto m = metric_triple(a, b);
        EXPECT_EQ(m.jaccard, oracles::jaccard(a, b));
        EXPECT_EQ(m.micro_f1, oracles::micro(a, b));
        EXPECT_EQ(m.macro_f1, oracles::macro(a, b));
    }
}

TEST(Metrics, SymmetricAndBounded) {
    Rng rng(99);
    const auto t = fixtures::semeval_taxonomy();
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 20);
        const auto a = random_map(rng, t, n);
        const auto b = random_map(rng, t, n);
        const auto ab = metric_triple(a, b);
        EXPECT_EQ(ab, metric_triple(b, a));
        for (double v : {ab.jaccard, ab.micro_f1, ab.macro_f1}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Metrics, FlippingABitNeverRaisesJaccard) {
    Rng rng(5);
    const auto t = fixtures::semeval_taxonomy();
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_map(rng, t, 1 + uniform_below(rng, 10));
        auto copy = a;
        const auto& entries = a.entries();
        auto it = entries.begin();
        std::advance(it, static_cast<long>(uniform_below(rng, entries.size())));
        const std::size_t j = uniform_below(rng, t.size());
        copy.set(it->first, LabelSet::from_bits(it->second.bits() ^ (std::uint64_t{1} << j)));
        EXPECT_LE(jaccard_similarity(a, copy), jaccard_similarity(a, a));
        EXPECT_LT(jaccard_similarity(a, copy), 1.0);
    }
}

TEST(Summarize, PopulationStdAndExactConstants) {
    std::vector<MetricTriple> same(3, MetricTriple{0.1, 0.2, 0.3});
    const auto s = summarize(same);
    EXPECT_EQ(s.mean, (MetricTriple{0.1, 0.2, 0.3}));
    EXPECT_EQ(s.stddev, (MetricTriple{0.0, 0.0, 0.0}));
    EXPECT_EQ(s.count, 3u);
    std::vector<MetricTriple> spread{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const auto t = summarize(spread);
    EXPECT_DOUBLE_EQ(t.mean.jaccard, 0.5);
    EXPECT_DOUBLE_EQ(t.stddev.jaccard, 0.5);
}

TEST(PredictionMapTest, RestrictionListsMissingIds) {
    EmotionTaxonomy t("t", {"a"});
    const auto a = map_of(t, {{"1", {"a"}}, {"2", {}}});
    EXPECT_EQ(a.restricted_to({"2"}).ids(), std::set<std::string>{"2"});
    try {
        a.restricted_to({"1", "7", "9"});
        FAIL();
    } catch (const AlignmentError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find('7'), std::string::npos);
        EXPECT_NE(msg.find('9'), std::string::npos);
    }
}
