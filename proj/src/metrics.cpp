#include "priorpull/metrics.hpp"

#include "priorpull/error.hpp"

#include <cmath>
#include <tuple>
#include <utility>

namespace priorpull {

PredictionMap::PredictionMap(EmotionTaxonomy taxonomy, std::map<std::string, LabelSet> entries)
    : taxonomy_(std::move(taxonomy)), entries_(std::move(entries)) {
    for (const auto& [id, labels] : entries_)
        if (!labels.fits(taxonomy_.size()))
            throw AlignmentError("prediction for '" + id + "' has labels outside taxonomy '" + taxonomy_.name() + "'");
}

PredictionMap PredictionMap::from_gold(const MultilabelDataset& dataset) {
    std::map<std::string, LabelSet> entries;
    for (const auto& ex : dataset.examples()) entries.emplace(ex.id, ex.gold);
    return PredictionMap(dataset.taxonomy(), std::move(entries));
}

LabelSet PredictionMap::at(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw AlignmentError("no prediction for id '" + id + "'");
    return it->second;
}

void PredictionMap::set(const std::string& id, LabelSet labels) {
    if (!labels.fits(taxonomy_.size()))
        throw AlignmentError("prediction for '" + id + "' has labels outside taxonomy '" + taxonomy_.name() + "'");
    entries_[id] = labels;
}

PredictionMap PredictionMap::restricted_to(const std::set<std::string>& ids) const {
    std::map<std::string, LabelSet> out;
    std::vector<std::string> missing;
    for (const auto& id : ids) {
        auto it = entries_.find(id);
        if (it == entries_.end()) {
            missing.push_back(id);
        } else {
            out.emplace(id, it->second);
        }
    }
    if (!missing.empty()) {
        std::string msg = "predictions missing " + std::to_string(missing.size()) + " id(s):";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
        if (missing.size() > 20) msg += " ...";
        throw AlignmentError(msg);
    }
    return PredictionMap(taxonomy_, std::move(out));
}

std::set<std::string> PredictionMap::ids() const {
    std::set<std::string> out;
    for (const auto& [id, _] : entries_) out.insert(id);
    return out;
}

namespace {

struct Counts {
    std::vector<long long> tp, fp, fn;
    long long tp_total = 0, fp_total = 0, fn_total = 0;
    std::size_t examples = 0;
    // Sum of per-example Jaccard ratios.
    double jaccard_sum = 0.0;
};

// Walks both maps in id order; `b` is treated as the "prediction" side for
// FP/FN naming only, the metrics themselves are symmetric.
Counts count(const PredictionMap& a, const PredictionMap& b, Alignment mode) {
    if (!(a.taxonomy() == b.taxonomy())) throw AlignmentError("prediction maps use different taxonomies");
    const std::size_t labels = a.taxonomy().size();
    Counts c;
    c.tp.assign(labels, 0);
    c.fp.assign(labels, 0);
    c.fn.assign(labels, 0);

    auto ia = a.entries().begin();
    auto ib = b.entries().begin();
    const auto ea = a.entries().end();
    const auto eb = b.entries().end();
    while (ia != ea || ib != eb) {
        if (ib == eb || (ia != ea && ia->first < ib->first)) {
            if (mode == Alignment::strict) throw AlignmentError("id '" + ia->first + "' missing from second prediction map");
            ++ia;
            continue;
        }
        if (ia == ea || ib->first < ia->first) {
            if (mode == Alignment::strict) throw AlignmentError("id '" + ib->first + "' missing from first prediction map");
            ++ib;
            continue;
        }
        const LabelSet x = ia->second;
        const LabelSet y = ib->second;
        const LabelSet both = x & y;
        const LabelSet either = x | y;
        c.jaccard_sum += either.empty() ? 1.0 : static_cast<double>(both.size()) / static_cast<double>(either.size());
        for (std::size_t j = 0; j < labels; ++j) {
            const bool in_x = x.contains(j);
            const bool in_y = y.contains(j);
            c.tp[j] += in_x && in_y;
            c.fp[j] += !in_x && in_y;
            c.fn[j] += in_x && !in_y;
        }
        ++c.examples;
        ++ia;
        ++ib;
    }
    if (mode == Alignment::allow_partial && c.examples == 0 && (a.size() != 0 || b.size() != 0))
        throw AlignmentError("prediction maps share no ids");
    for (std::size_t j = 0; j < labels; ++j) {
        c.tp_total += c.tp[j];
        c.fp_total += c.fp[j];
        c.fn_total += c.fn[j];
    }
    return c;
}

double jaccard_of(const Counts& c) {
    return c.examples == 0 ? 1.0 : c.jaccard_sum / static_cast<double>(c.examples);
}

double f1(long long tp, long long fp, long long fn, double empty_value) {
    const long long denom = 2 * tp + fp + fn;
    return denom == 0 ? empty_value : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

double micro_of(const Counts& c) { return f1(c.tp_total, c.fp_total, c.fn_total, 1.0); }

double macro_of(const Counts& c) {
    if (c.tp.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < c.tp.size(); ++j) sum += f1(c.tp[j], c.fp[j], c.fn[j], 0.0);
    return sum / static_cast<double>(c.tp.size());
}

} // namespace

double jaccard_similarity(const PredictionMap& a, const PredictionMap& b, Alignment mode) {
    return jaccard_of(count(a, b, mode));
}

double micro_f1(const PredictionMap& a, const PredictionMap& b, Alignment mode) { return micro_of(count(a, b, mode)); }

double macro_f1(const PredictionMap& a, const PredictionMap& b, Alignment mode) { return macro_of(count(a, b, mode)); }

MetricTriple metric_triple(const PredictionMap& a, const PredictionMap& b, Alignment mode) {
    const Counts c = count(a, b, mode);
    return {jaccard_of(c), micro_of(c), macro_of(c)};
}

namespace {

// Mean and population standard deviation of one component. Identical inputs
// give their own value and exactly zero spread.
std::pair<double, double> mean_std(std::span<const MetricTriple> values, double MetricTriple::*field) {
    const double first = values.front().*field;
    bool constant = true;
    double sum = 0.0;
    for (const auto& v : values) {
        sum += v.*field;
        constant = constant && v.*field == first;
    }
    if (constant) return {first, 0.0};
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& v : values) sq += (v.*field - mean) * (v.*field - mean);
    return {mean, std::sqrt(sq / n)};
}

} // namespace

MetricStats summarize(std::span<const MetricTriple> values) {
    MetricStats s;
    s.count = values.size();
    if (values.empty()) return s;
    std::tie(s.mean.jaccard, s.stddev.jaccard) = mean_std(values, &MetricTriple::jaccard);
    std::tie(s.mean.micro_f1, s.stddev.micro_f1) = mean_std(values, &MetricTriple::micro_f1);
    std::tie(s.mean.macro_f1, s.stddev.macro_f1) = mean_std(values, &MetricTriple::macro_f1);
    return s;
}

} // namespace priorpull
