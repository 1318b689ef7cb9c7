#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace priorpull {

// Lowercase, whitespace-trimmed form used for every label comparison.
std::string normalize_label(std::string_view label);

/// Ordered label vocabulary. The order is used verbatim when rendering
/// prompts and when indexing per-label metric counts.
class EmotionTaxonomy {
public:
    static constexpr std::size_t kMaxLabels = 64;

    EmotionTaxonomy() = default;
    EmotionTaxonomy(std::string name, std::vector<std::string> labels);

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(std::size_t index) const { return labels_.at(index); }

    // Lookup after normalization.
    std::optional<std::size_t> index_of(std::string_view label) const;

    // Taxonomies are interchangeable when their label lists match; the name
    // is descriptive only.
    bool operator==(const EmotionTaxonomy& other) const { return labels_ == other.labels_; }

private:
    std::string name_;
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// A subset of a taxonomy, stored as a bitmask over label indices.
class LabelSet {
public:
    constexpr LabelSet() = default;
    static constexpr LabelSet from_bits(std::uint64_t bits) {
        LabelSet s;
        s.bits_ = bits;
        return s;
    }

    constexpr std::uint64_t bits() const noexcept { return bits_; }
    constexpr bool contains(std::size_t index) const noexcept { return (bits_ >> index) & 1U; }
    constexpr void insert(std::size_t index) noexcept { bits_ |= std::uint64_t{1} << index; }
    constexpr void erase(std::size_t index) noexcept { bits_ &= ~(std::uint64_t{1} << index); }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    std::size_t size() const noexcept;

    // True when every member indexes into a taxonomy of `label_count` labels.
    constexpr bool fits(std::size_t label_count) const noexcept {
        return label_count >= 64 || (bits_ >> label_count) == 0;
    }

    friend constexpr LabelSet operator&(LabelSet a, LabelSet b) { return from_bits(a.bits_ & b.bits_); }
    friend constexpr LabelSet operator|(LabelSet a, LabelSet b) { return from_bits(a.bits_ | b.bits_); }
    friend constexpr LabelSet operator-(LabelSet a, LabelSet b) { return from_bits(a.bits_ & ~b.bits_); }
    friend constexpr bool operator==(LabelSet, LabelSet) = default;
    friend constexpr auto operator<=>(LabelSet, LabelSet) = default;

private:
    std::uint64_t bits_ = 0;
};

// Throws DatasetError on a name outside the taxonomy.
LabelSet make_label_set(const EmotionTaxonomy& taxonomy, std::span<const std::string> names);
// Member names in taxonomy order.
std::vector<std::string> label_names(const EmotionTaxonomy& taxonomy, LabelSet labels);

struct LabeledExample {
    std::string id;
    std::string text;
    LabelSet gold;  // may be empty

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

enum class Split { train, dev, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

class MultilabelDataset {
public:
    MultilabelDataset() = default;
    // Validates unique ids and that gold sets fit the taxonomy.
    MultilabelDataset(EmotionTaxonomy taxonomy, Split split, std::vector<LabeledExample> examples);

    const EmotionTaxonomy& taxonomy() const noexcept { return taxonomy_; }
    Split split() const noexcept { return split_; }
    const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }
    const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }

    const LabeledExample* find(std::string_view id) const;
    bool contains(std::string_view id) const { return find(id) != nullptr; }

    friend bool operator==(const MultilabelDataset& a, const MultilabelDataset& b) {
        return a.taxonomy_ == b.taxonomy_ && a.split_ == b.split_ && a.examples_ == b.examples_;
    }

private:
    EmotionTaxonomy taxonomy_;
    Split split_ = Split::dev;
    std::vector<LabeledExample> examples_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class DatasetFormat { jsonl, semeval_tsv };
DatasetFormat parse_dataset_format(std::string_view name);

// One label per line, order significant; blank lines ignored.
EmotionTaxonomy load_taxonomy(const std::filesystem::path& path, std::string name = {});

/// Reads a dataset file.
///
/// JSONL rows are `{"id", "text", "labels"}` and need `taxonomy`. SemEval TSV
/// takes its taxonomy from the header (`ID`, `Tweet`, then one 0/1 column per
/// emotion); when `taxonomy` is given the header must agree with it.
/// Errors carry the offending line number.
MultilabelDataset load_dataset(const std::filesystem::path& path, DatasetFormat format, Split split,
                               const std::optional<EmotionTaxonomy>& taxonomy = std::nullopt);
MultilabelDataset read_jsonl(std::istream& in, const EmotionTaxonomy& taxonomy, Split split,
                             const std::string& source = "<stream>");
MultilabelDataset read_semeval_tsv(std::istream& in, Split split, const std::optional<EmotionTaxonomy>& taxonomy,
                                   const std::string& source = "<stream>");

void write_jsonl(std::ostream& out, const MultilabelDataset& dataset);
void save_jsonl(const std::filesystem::path& path, const MultilabelDataset& dataset);

/// Source label -> cluster label. A cluster of `none` drops the source label.
class PoolingMap {
public:
    PoolingMap(std::vector<std::pair<std::string, std::string>> pairs, EmotionTaxonomy clusters);

    const EmotionTaxonomy& clusters() const noexcept { return clusters_; }
    // nullopt: label unknown to the map. Inner nullopt: label dropped.
    std::optional<std::optional<std::size_t>> cluster_of(std::string_view source_label) const;

private:
    EmotionTaxonomy clusters_;
    std::unordered_map<std::string, std::optional<std::size_t>> mapping_;
};

// Lines of `source<TAB>cluster`. Without a cluster taxonomy the clusters are
// taken in order of first appearance.
PoolingMap load_pooling_map(const std::filesystem::path& path,
                            const std::optional<EmotionTaxonomy>& clusters = std::nullopt);

MultilabelDataset pool_labels(const MultilabelDataset& dataset, const PoolingMap& mapping);

// Uniform sample without replacement; keeps the original relative order.
MultilabelDataset subsample(const MultilabelDataset& dataset, std::size_t n, std::uint64_t seed);

// Concatenates datasets that share a taxonomy (e.g. train + dev).
MultilabelDataset concat(std::span<const MultilabelDataset> parts, Split split);

} // namespace priorpull
