#include "priorpull/corpus.hpp"

#include "priorpull/error.hpp"
#include "priorpull/hashing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace priorpull {

namespace {

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find('\t', start);
        cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return cells;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    return in;
}

std::string where(const std::string& source, std::size_t line_no) {
    return source + ":" + std::to_string(line_no) + ": ";
}

} // namespace

std::string normalize_label(std::string_view label) {
    std::string out = trim(label);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// ---- EmotionTaxonomy -------------------------------------------------------

EmotionTaxonomy::EmotionTaxonomy(std::string name, std::vector<std::string> labels) : name_(std::move(name)) {
    if (labels.size() > kMaxLabels)
        throw DatasetError("taxonomy '" + name_ + "' has " + std::to_string(labels.size()) +
                           " labels; at most 64 are supported");
    labels_.reserve(labels.size());
    for (auto& raw : labels) {
        std::string label = normalize_label(raw);
        if (label.empty()) throw DatasetError("taxonomy '" + name_ + "' contains an empty label");
        if (!index_.emplace(label, labels_.size()).second)
            throw DatasetError("taxonomy '" + name_ + "' repeats label '" + label + "'");
        labels_.push_back(std::move(label));
    }
}

std::optional<std::size_t> EmotionTaxonomy::index_of(std::string_view label) const {
    auto it = index_.find(normalize_label(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelSet::size() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }

LabelSet make_label_set(const EmotionTaxonomy& taxonomy, std::span<const std::string> names) {
    LabelSet set;
    for (const auto& name : names) {
        auto idx = taxonomy.index_of(name);
        if (!idx) throw DatasetError("label '" + name + "' is not in taxonomy '" + taxonomy.name() + "'");
        set.insert(*idx);
    }
    return set;
}

std::vector<std::string> label_names(const EmotionTaxonomy& taxonomy, LabelSet labels) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < taxonomy.size(); ++i)
        if (labels.contains(i)) out.push_back(taxonomy.label(i));
    return out;
}

std::string_view to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    }
    return "dev";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    throw DatasetError("unknown split '" + std::string(name) + "' (allowed: train, dev, test)");
}

DatasetFormat parse_dataset_format(std::string_view name) {
    if (name == "jsonl") return DatasetFormat::jsonl;
    if (name == "semeval_tsv") return DatasetFormat::semeval_tsv;
    throw DatasetError("unknown dataset format '" + std::string(name) + "' (allowed: jsonl, semeval_tsv)");
}

// ---- MultilabelDataset -----------------------------------------------------

MultilabelDataset::MultilabelDataset(EmotionTaxonomy taxonomy, Split split, std::vector<LabeledExample> examples)
    : taxonomy_(std::move(taxonomy)), split_(split), examples_(std::move(examples)) {
    index_.reserve(examples_.size());
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        const auto& ex = examples_[i];
        if (!index_.emplace(ex.id, i).second) throw DatasetError("duplicate example id '" + ex.id + "'");
        if (!ex.gold.fits(taxonomy_.size()))
            throw DatasetError("example '" + ex.id + "' has labels outside taxonomy '" + taxonomy_.name() + "'");
    }
}

const LabeledExample* MultilabelDataset::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &examples_[it->second];
}

// ---- loading ---------------------------------------------------------------

EmotionTaxonomy load_taxonomy(const std::filesystem::path& path, std::string name) {
    auto in = open_or_throw(path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        std::string label = trim(line);
        if (!label.empty()) labels.push_back(label);
    }
    if (name.empty()) name = path.stem().string();
    return EmotionTaxonomy(std::move(name), std::move(labels));
}

MultilabelDataset read_jsonl(std::istream& in, const EmotionTaxonomy& taxonomy, Split split,
                             const std::string& source) {
    std::vector<LabeledExample> examples;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (trim(line).empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DatasetError(where(source, line_no) + "malformed JSON: " + e.what());
        }
        if (!row.is_object() || !row.contains("id") || !row.contains("text") || !row.contains("labels") ||
            !row["id"].is_string() || !row["text"].is_string() || !row["labels"].is_array())
            throw DatasetError(where(source, line_no) + "expected {\"id\": string, \"text\": string, \"labels\": [string]}");
        LabeledExample ex;
        ex.id = row["id"].get<std::string>();
        ex.text = row["text"].get<std::string>();
        for (const auto& label : row["labels"]) {
            if (!label.is_string()) throw DatasetError(where(source, line_no) + "labels must be strings");
            auto idx = taxonomy.index_of(label.get<std::string>());
            if (!idx)
                throw DatasetError(where(source, line_no) + "label '" + label.get<std::string>() +
                                   "' is not in taxonomy '" + taxonomy.name() + "'");
            ex.gold.insert(*idx);
        }
        if (!seen.insert(ex.id).second) throw DatasetError(where(source, line_no) + "duplicate id '" + ex.id + "'");
        examples.push_back(std::move(ex));
    }
    return MultilabelDataset(taxonomy, split, std::move(examples));
}

MultilabelDataset read_semeval_tsv(std::istream& in, Split split, const std::optional<EmotionTaxonomy>& taxonomy,
                                   const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DatasetError(source + ": missing header row");
    strip_cr(line);
    auto header = split_tabs(line);
    if (header.size() < 3 || trim(header[0]) != "ID" || trim(header[1]) != "Tweet")
        throw DatasetError(where(source, 1) + "header must start with ID<TAB>Tweet followed by emotion columns");
    EmotionTaxonomy columns(taxonomy ? taxonomy->name() : "semeval",
                            std::vector<std::string>(header.begin() + 2, header.end()));
    if (taxonomy && !(*taxonomy == columns))
        throw DatasetError(where(source, 1) + "emotion columns do not match taxonomy '" + taxonomy->name() + "'");

    std::vector<LabeledExample> examples;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (trim(line).empty()) continue;
        auto cells = split_tabs(line);
        if (cells.size() != header.size())
            throw DatasetError(where(source, line_no) + "expected " + std::to_string(header.size()) + " columns, got " +
                               std::to_string(cells.size()));
        LabeledExample ex;
        ex.id = trim(cells[0]);
        ex.text = cells[1];
        for (std::size_t c = 2; c < cells.size(); ++c) {
            auto cell = trim(cells[c]);
            if (cell == "1") {
                ex.gold.insert(c - 2);
            } else if (cell != "0") {
                throw DatasetError(where(source, line_no) + "column '" + columns.label(c - 2) +
                                   "' must be 0 or 1, got '" + cell + "'");
            }
        }
        if (ex.id.empty()) throw DatasetError(where(source, line_no) + "empty ID");
        if (!seen.insert(ex.id).second) throw DatasetError(where(source, line_no) + "duplicate id '" + ex.id + "'");
        examples.push_back(std::move(ex));
    }
    return MultilabelDataset(std::move(columns), split, std::move(examples));
}

MultilabelDataset load_dataset(const std::filesystem::path& path, DatasetFormat format, Split split,
                               const std::optional<EmotionTaxonomy>& taxonomy) {
    auto in = open_or_throw(path);
    switch (format) {
    case DatasetFormat::jsonl:
        if (!taxonomy) throw DatasetError(path.string() + ": JSONL datasets need a taxonomy");
        return read_jsonl(in, *taxonomy, split, path.string());
    case DatasetFormat::semeval_tsv:
        return read_semeval_tsv(in, split, taxonomy, path.string());
    }
    throw DatasetError("unsupported dataset format");
}

void write_jsonl(std::ostream& out, const MultilabelDataset& dataset) {
    for (const auto& ex : dataset.examples()) {
        nlohmann::ordered_json row;
        row["id"] = ex.id;
        row["text"] = ex.text;
        row["labels"] = label_names(dataset.taxonomy(), ex.gold);
        out << row.dump() << '\n';
    }
}

void save_jsonl(const std::filesystem::path& path, const MultilabelDataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path.string());
    write_jsonl(out, dataset);
}

// ---- pooling ---------------------------------------------------------------

PoolingMap::PoolingMap(std::vector<std::pair<std::string, std::string>> pairs, EmotionTaxonomy clusters)
    : clusters_(std::move(clusters)) {
    for (auto& [source, cluster] : pairs) {
        std::string key = normalize_label(source);
        std::optional<std::size_t> target;
        if (normalize_label(cluster) != "none") {
            target = clusters_.index_of(cluster);
            if (!target)
                throw DatasetError("pooling map sends '" + key + "' to '" + cluster + "', which is not a cluster label");
        }
        auto [it, inserted] = mapping_.emplace(key, target);
        if (!inserted && it->second != target)
            throw DatasetError("pooling map assigns '" + key + "' to two different clusters");
    }
}

std::optional<std::optional<std::size_t>> PoolingMap::cluster_of(std::string_view source_label) const {
    auto it = mapping_.find(normalize_label(source_label));
    if (it == mapping_.end()) return std::nullopt;
    return it->second;
}

PoolingMap load_pooling_map(const std::filesystem::path& path, const std::optional<EmotionTaxonomy>& clusters) {
    auto in = open_or_throw(path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> order;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (trim(line).empty()) continue;
        auto cells = split_tabs(line);
        if (cells.size() != 2) throw DatasetError(where(path.string(), line_no) + "expected source_label<TAB>cluster_label");
        std::string cluster = normalize_label(cells[1]);
        if (cluster != "none" && seen.insert(cluster).second) order.push_back(cluster);
        pairs.emplace_back(trim(cells[0]), cluster);
    }
    return PoolingMap(std::move(pairs), clusters ? *clusters : EmotionTaxonomy(path.stem().string(), order));
}

MultilabelDataset pool_labels(const MultilabelDataset& dataset, const PoolingMap& mapping) {
    const auto& source = dataset.taxonomy();
    std::vector<std::optional<std::size_t>> target(source.size());
    std::vector<bool> known(source.size(), false);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (auto c = mapping.cluster_of(source.label(i))) {
            target[i] = *c;
            known[i] = true;
        }
    }
    std::vector<LabeledExample> pooled;
    pooled.reserve(dataset.size());
    for (const auto& ex : dataset.examples()) {
        LabeledExample out{ex.id, ex.text, {}};
        for (std::size_t i = 0; i < source.size(); ++i) {
            if (!ex.gold.contains(i)) continue;
            if (!known[i])
                throw DatasetError("pooling map has no entry for label '" + source.label(i) + "' (example '" + ex.id + "')");
            if (target[i]) out.gold.insert(*target[i]);
        }
        pooled.push_back(std::move(out));
    }
    return MultilabelDataset(mapping.clusters(), dataset.split(), std::move(pooled));
}

MultilabelDataset subsample(const MultilabelDataset& dataset, std::size_t n, std::uint64_t seed) {
    if (n > dataset.size())
        throw DatasetError("cannot subsample " + std::to_string(n) + " examples from a dataset of " +
                           std::to_string(dataset.size()));
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(stable_hash("subsample", seed));
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<LabeledExample> picked;
    picked.reserve(n);
    for (auto i : idx) picked.push_back(dataset[i]);
    return MultilabelDataset(dataset.taxonomy(), dataset.split(), std::move(picked));
}

MultilabelDataset concat(std::span<const MultilabelDataset> parts, Split split) {
    if (parts.empty()) return MultilabelDataset({}, split, {});
    std::vector<LabeledExample> all;
    for (const auto& part : parts) {
        if (!(part.taxonomy() == parts.front().taxonomy()))
            throw DatasetError("cannot concatenate datasets with different taxonomies");
        all.insert(all.end(), part.examples().begin(), part.examples().end());
    }
    return MultilabelDataset(parts.front().taxonomy(), split, std::move(all));
}

} // namespace priorpull
