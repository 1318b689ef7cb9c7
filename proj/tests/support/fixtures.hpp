#pragma once

#include "priorpull/corpus.hpp"
#include "priorpull/hashing.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fixtures {

using namespace priorpull;

inline const std::filesystem::path kSourceDir = PRIORPULL_SOURCE_DIR;

EmotionTaxonomy semeval_taxonomy();

// n examples with uniformly random label sets; empty sets included.
MultilabelDataset random_dataset(Rng& rng, std::size_t n, const EmotionTaxonomy& taxonomy,
                                 const std::string& prefix = "ex", Split split = Split::dev);

/// Topic-structured corpus: examples of one topic share vocabulary and gold
/// labels, so demonstrations retrieved by word overlap carry the right answer.
MultilabelDataset topic_corpus(std::size_t n, const EmotionTaxonomy& taxonomy, const std::string& prefix, Split split,
                               std::uint64_t seed);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "priorpull");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_taxonomy(const std::filesystem::path& path, const EmotionTaxonomy& taxonomy);

} // namespace fixtures
