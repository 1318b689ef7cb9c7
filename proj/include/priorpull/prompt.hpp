#pragma once

#include "priorpull/corpus.hpp"
#include "priorpull/sampling.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace priorpull {

enum class LabelFormat { json_object, comma_separated };
std::string_view to_string(LabelFormat format);
LabelFormat parse_label_format(std::string_view name);

/// Prompt template with `{labels}`, `{text}` and `{label}` placeholders.
///
/// Everything before the line holding `{text}` is the instruction header; the
/// rest is the demonstration block, repeated once per demonstration and once
/// more for the query with `{label}` and anything after it left empty. Blocks
/// are separated by the newline run that ends the header.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string text, LabelFormat format);
    static PromptTemplate load(const std::filesystem::path& path, LabelFormat format);
    static PromptTemplate default_template(LabelFormat format);

    const std::string& text() const noexcept { return text_; }
    LabelFormat label_format() const noexcept { return format_; }
    const std::string& header() const noexcept { return header_; }
    const std::string& block() const noexcept { return block_; }
    const std::string& separator() const noexcept { return separator_; }
    // Block text before `{text}`, e.g. "Input: ".
    const std::string& block_prefix() const noexcept { return block_prefix_; }

private:
    std::string text_;
    LabelFormat format_ = LabelFormat::json_object;
    std::string header_;
    std::string block_;
    std::string separator_;
    std::string block_prefix_;
};

extern const std::string_view kDefaultTemplateText;

// json_object: every taxonomy label mapped to true/false, in taxonomy order.
// comma_separated: present labels joined by ", ", or "none" when empty.
std::string format_labels(const EmotionTaxonomy& taxonomy, LabelSet labels, LabelFormat format);

std::string render_prompt(const PromptTemplate& tmpl, const EmotionTaxonomy& taxonomy,
                          std::span<const Demonstration> demos, const LabeledExample& query);

enum class ParseStatus { clean, fuzzy_matched, partial, unparseable };
std::string_view to_string(ParseStatus status);

struct ParseOutcome {
    LabelSet labels;
    ParseStatus status = ParseStatus::unparseable;
    std::vector<std::string> dropped_tokens;
};

/// Reads a model completion back into a label set. Never throws: failures are
/// reported through `status`. Text from the first `stop_marker` on is
/// ignored, since completion models tend to continue with a new example.
ParseOutcome parse_output(std::string_view raw, const EmotionTaxonomy& taxonomy, LabelFormat format,
                          std::string_view stop_marker = "Input:");

} // namespace priorpull
