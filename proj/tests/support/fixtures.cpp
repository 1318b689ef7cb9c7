#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace fixtures {

EmotionTaxonomy semeval_taxonomy() {
    return EmotionTaxonomy("semeval", {"anger", "anticipation", "disgust", "fear", "joy", "love", "optimism",
                                       "pessimism", "sadness", "surprise", "trust"});
}

MultilabelDataset random_dataset(Rng& rng, std::size_t n, const EmotionTaxonomy& taxonomy, const std::string& prefix,
                                 Split split) {
    std::vector<LabeledExample> examples;
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = uniform_below(rng, std::uint64_t{1} << taxonomy.size());
        examples.push_back({prefix + "-" + std::to_string(i), "text " + std::to_string(i), LabelSet::from_bits(bits)});
    }
    return MultilabelDataset(taxonomy, split, std::move(examples));
}

MultilabelDataset topic_corpus(std::size_t n, const EmotionTaxonomy& taxonomy, const std::string& prefix, Split split,
                               std::uint64_t seed) {
    constexpr std::size_t kTopics = 10;
    Rng rng(stable_hash("topics", seed));
    std::vector<LabelSet> topic_gold;
    for (std::size_t t = 0; t < kTopics; ++t)
        topic_gold.push_back(LabelSet::from_bits(uniform_below(rng, std::uint64_t{1} << taxonomy.size())));
    std::vector<LabeledExample> examples;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = i % kTopics;
        std::ostringstream text;
        text << "topic" << t << "alpha topic" << t << "beta topic" << t << "gamma";
        for (int w = 0; w < 2; ++w) text << " filler" << uniform_below(rng, 50);
        std::ostringstream id;
        id << prefix << "-" << i;
        examples.push_back({id.str(), text.str(), topic_gold[t]});
    }
    return MultilabelDataset(taxonomy, split, std::move(examples));
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_taxonomy(const std::filesystem::path& path, const EmotionTaxonomy& taxonomy) {
    std::string text;
    for (const auto& l : taxonomy.labels()) text += l + "\n";
    write_text(path, text);
}

} // namespace fixtures
