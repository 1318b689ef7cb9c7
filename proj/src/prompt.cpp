#include "priorpull/prompt.hpp"

#include "priorpull/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace priorpull {

const std::string_view kDefaultTemplateText =
    "Perform emotion classification in the following examples by selecting none, one, or multiple of the "
    "following emotions: {labels}\n\nInput: {text}\n{label}";

std::string_view to_string(LabelFormat format) {
    return format == LabelFormat::json_object ? "json_object" : "comma_separated";
}

LabelFormat parse_label_format(std::string_view name) {
    if (name == "json_object") return LabelFormat::json_object;
    if (name == "comma_separated") return LabelFormat::comma_separated;
    throw TemplateError("unknown label format '" + std::string(name) + "' (allowed: json_object, comma_separated)");
}

std::string_view to_string(ParseStatus status) {
    switch (status) {
    case ParseStatus::clean: return "clean";
    case ParseStatus::fuzzy_matched: return "fuzzy_matched";
    case ParseStatus::partial: return "partial";
    case ParseStatus::unparseable: return "unparseable";
    }
    return "unparseable";
}

// ---- template --------------------------------------------------------------

PromptTemplate PromptTemplate::parse(std::string text, LabelFormat format) {
    PromptTemplate t;
    t.text_ = std::move(text);
    t.format_ = format;
    const auto labels_pos = t.text_.find("{labels}");
    const auto text_pos = t.text_.find("{text}");
    const auto label_pos = t.text_.find("{label}");
    if (labels_pos == std::string::npos) throw TemplateError("template is missing the {labels} placeholder");
    if (text_pos == std::string::npos) throw TemplateError("template is missing the {text} placeholder");
    if (label_pos == std::string::npos) throw TemplateError("template is missing the {label} placeholder");
    if (label_pos < text_pos) throw TemplateError("{label} must follow {text} in the demonstration block");

    const auto line_start = t.text_.rfind('\n', text_pos);
    const std::size_t block_start = line_start == std::string::npos ? 0 : line_start + 1;
    if (labels_pos >= block_start) throw TemplateError("{labels} must appear in the instruction, before the {text} line");
    t.header_ = t.text_.substr(0, block_start);
    t.block_ = t.text_.substr(block_start);
    t.block_prefix_ = t.text_.substr(block_start, text_pos - block_start);

    auto sep_start = t.header_.find_last_not_of('\n');
    t.separator_ = sep_start == std::string::npos ? t.header_ : t.header_.substr(sep_start + 1);
    if (t.separator_.empty()) t.separator_ = "\n";
    return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path, LabelFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot open template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    // A single end-of-file newline is not part of the template.
    if (!text.empty() && text.back() == '\n') text.pop_back();
    if (!text.empty() && text.back() == '\r') text.pop_back();
    return parse(std::move(text), format);
}

PromptTemplate PromptTemplate::default_template(LabelFormat format) {
    return parse(std::string(kDefaultTemplateText), format);
}

// ---- rendering -------------------------------------------------------------

std::string format_labels(const EmotionTaxonomy& taxonomy, LabelSet labels, LabelFormat format) {
    std::string out;
    if (format == LabelFormat::json_object) {
        out = "{";
        for (std::size_t i = 0; i < taxonomy.size(); ++i) {
            if (i) out += ", ";
            out += nlohmann::json(taxonomy.label(i)).dump();
            out += labels.contains(i) ? ": true" : ": false";
        }
        out += "}";
        return out;
    }
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        if (!labels.contains(i)) continue;
        if (!out.empty()) out += ", ";
        out += taxonomy.label(i);
    }
    return out.empty() ? "none" : out;
}

namespace {

// Single-pass substitution so placeholder-like text inside values is kept.
std::string substitute(std::string_view pattern, std::string_view text, std::string_view label) {
    std::string out;
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern.compare(i, 6, "{text}") == 0) {
            out += text;
            i += 6;
        } else if (pattern.compare(i, 7, "{label}") == 0) {
            out += label;
            i += 7;
        } else {
            out += pattern[i++];
        }
    }
    return out;
}

} // namespace

std::string render_prompt(const PromptTemplate& tmpl, const EmotionTaxonomy& taxonomy,
                          std::span<const Demonstration> demos, const LabeledExample& query) {
    std::string label_list;
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        if (i) label_list += ", ";
        label_list += taxonomy.label(i);
    }
    std::string out;
    const auto& header = tmpl.header();
    const auto lp = header.find("{labels}");
    out += header.substr(0, lp);
    out += label_list;
    out += header.substr(lp + 8);

    for (const auto& d : demos) {
        if (!d.shown_labels.fits(taxonomy.size()))
            throw TemplateError("demonstration '" + d.example_id + "' shows labels outside the taxonomy");
        out += substitute(tmpl.block(), d.text, format_labels(taxonomy, d.shown_labels, tmpl.label_format()));
        out += tmpl.separator();
    }
    const auto& block = tmpl.block();
    out += substitute(std::string_view(block).substr(0, block.find("{label}")), query.text, "");
    return out;
}

// ---- parsing ---------------------------------------------------------------

namespace {

constexpr std::string_view kTrimmable = ".,;:!?\"'`*()[]{}<>-_#";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim_space(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

struct Tally {
    LabelSet labels;
    bool recognized = false;  // some taxonomy label or explicit "none" was read
    bool normalized = false;  // case or punctuation had to be fixed
    std::vector<std::string> dropped;
};

ParseOutcome finish(Tally t) {
    ParseOutcome out;
    out.dropped_tokens = std::move(t.dropped);
    if (!t.recognized) {
        out.status = ParseStatus::unparseable;
        return out;
    }
    out.labels = t.labels;
    if (!out.dropped_tokens.empty()) {
        out.status = ParseStatus::partial;
    } else {
        out.status = t.normalized ? ParseStatus::fuzzy_matched : ParseStatus::clean;
    }
    return out;
}

void read_token(std::string_view raw_token, const EmotionTaxonomy& taxonomy, Tally& t) {
    std::string_view token = trim_space(raw_token);
    if (token.empty()) return;
    std::string_view core = token;
    while (!core.empty() && (kTrimmable.find(core.front()) != std::string_view::npos || is_space(core.front())))
        core.remove_prefix(1);
    while (!core.empty() && (kTrimmable.find(core.back()) != std::string_view::npos || is_space(core.back())))
        core.remove_suffix(1);
    if (core.empty()) return;
    const bool trimmed = core.size() != token.size();
    const std::string folded = normalize_label(core);
    const bool cased = folded != core;
    if (folded == "none" || folded == "neutral") {
        t.recognized = true;
        t.normalized = t.normalized || trimmed || cased;
        return;
    }
    if (auto idx = taxonomy.index_of(folded)) {
        t.labels.insert(*idx);
        t.recognized = true;
        t.normalized = t.normalized || trimmed || cased;
    } else {
        t.dropped.emplace_back(token);
    }
}

Tally parse_list(std::string_view text, const EmotionTaxonomy& taxonomy) {
    Tally t;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',' || text[i] == '\n') {
            read_token(text.substr(start, i - start), taxonomy, t);
            start = i + 1;
        }
    }
    return t;
}

// Index one past the brace closing the object that opens at `open`, or npos.
std::size_t match_object(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}' && --depth == 0) {
            return i + 1;
        }
    }
    return std::string_view::npos;
}

void read_pair(const std::string& key, bool truthy, bool loose_value, const EmotionTaxonomy& taxonomy, Tally& t) {
    auto idx = taxonomy.index_of(key);
    if (!idx) {
        t.dropped.push_back(key);
        return;
    }
    t.recognized = true;
    if (loose_value || normalize_label(key) != key) t.normalized = true;
    if (truthy) t.labels.insert(*idx);
}

std::optional<Tally> parse_object(std::string_view text, const EmotionTaxonomy& taxonomy) {
    const auto open = text.find('{');
    if (open == std::string_view::npos) return std::nullopt;
    const auto close = match_object(text, open);
    if (close != std::string_view::npos) {
        auto obj = nlohmann::json::parse(text.substr(open, close - open), nullptr, false);
        if (!obj.is_discarded() && obj.is_object()) {
            Tally t;
            for (const auto& [key, value] : obj.items()) {
                if (value.is_boolean()) {
                    read_pair(key, value.get<bool>(), false, taxonomy, t);
                } else if (value.is_number()) {
                    read_pair(key, value.get<double>() != 0.0, true, taxonomy, t);
                } else if (value.is_string()) {
                    const auto v = normalize_label(value.get<std::string>());
                    read_pair(key, v == "true" || v == "yes" || v == "1", true, taxonomy, t);
                } else {
                    read_pair(key, false, true, taxonomy, t);
                }
            }
            return t;
        }
    }
    // Truncated or malformed object: salvage `"key": true|false` pairs.
    static const std::regex pair_re(R"re("([^"]*)"\s*:\s*(true|false))re", std::regex::icase);
    const std::string tail(text.substr(open));
    Tally t;
    bool any = false;
    for (auto it = std::sregex_iterator(tail.begin(), tail.end(), pair_re); it != std::sregex_iterator(); ++it) {
        any = true;
        read_pair((*it)[1].str(), normalize_label((*it)[2].str()) == "true", true, taxonomy, t);
    }
    if (!any) return std::nullopt;
    t.normalized = true;
    return t;
}

} // namespace

ParseOutcome parse_output(std::string_view raw, const EmotionTaxonomy& taxonomy, LabelFormat format,
                          std::string_view stop_marker) {
    std::string_view text = raw;
    if (!stop_marker.empty()) {
        auto stop = text.find(stop_marker);
        if (stop != std::string_view::npos) text = text.substr(0, stop);
    }
    if (format == LabelFormat::json_object) {
        if (auto t = parse_object(text, taxonomy)) return finish(std::move(*t));
        Tally t = parse_list(text, taxonomy);
        t.normalized = true;
        return finish(std::move(t));
    }
    return finish(parse_list(text, taxonomy));
}

} // namespace priorpull
