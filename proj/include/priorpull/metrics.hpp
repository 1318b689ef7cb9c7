#pragma once

#include "priorpull/corpus.hpp"

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace priorpull {

/// Example id -> predicted label set over one taxonomy.
class PredictionMap {
public:
    PredictionMap() = default;
    PredictionMap(EmotionTaxonomy taxonomy, std::map<std::string, LabelSet> entries);

    static PredictionMap from_gold(const MultilabelDataset& dataset);

    const EmotionTaxonomy& taxonomy() const noexcept { return taxonomy_; }
    const std::map<std::string, LabelSet>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }
    LabelSet at(const std::string& id) const;

    void set(const std::string& id, LabelSet labels);

    // Entries for `ids` only; throws AlignmentError listing any id not present.
    PredictionMap restricted_to(const std::set<std::string>& ids) const;
    std::set<std::string> ids() const;

    friend bool operator==(const PredictionMap&, const PredictionMap&) = default;

private:
    EmotionTaxonomy taxonomy_;
    std::map<std::string, LabelSet> entries_;
};

struct MetricTriple {
    double jaccard = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;

    friend bool operator==(const MetricTriple&, const MetricTriple&) = default;
};

// strict: id sets must match exactly. allow_partial: score the intersection.
enum class Alignment { strict, allow_partial };

// Mean per-example |a∩b| / |a∪b|; an example empty on both sides scores 1.
double jaccard_similarity(const PredictionMap& a, const PredictionMap& b, Alignment mode = Alignment::strict);
// 2TP / (2TP + FP + FN) over pooled counts; 1 when nothing is predicted anywhere.
double micro_f1(const PredictionMap& a, const PredictionMap& b, Alignment mode = Alignment::strict);
// Unweighted mean of per-label F1 over the whole taxonomy; a label with a
// zero denominator scores 0.
double macro_f1(const PredictionMap& a, const PredictionMap& b, Alignment mode = Alignment::strict);
MetricTriple metric_triple(const PredictionMap& a, const PredictionMap& b, Alignment mode = Alignment::strict);

struct MetricStats {
    MetricTriple mean;
    MetricTriple stddev;  // population form
    std::size_t count = 0;
};

MetricStats summarize(std::span<const MetricTriple> values);

} // namespace priorpull
