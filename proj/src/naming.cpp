#include "priorpull/naming.hpp"

#include "priorpull/error.hpp"

namespace priorpull {

namespace {

std::string shots(std::size_t k) { return std::to_string(k) + "s"; }

std::string base_name(SchemeKind kind, std::size_t k) {
    switch (kind) {
    case SchemeKind::icl: return shots(k);
    case SchemeKind::cossim: return "cossim-" + shots(k);
    case SchemeKind::prior_uniform: return "random-prior-" + shots(k);
    case SchemeKind::prior_independent: return "proxy-prior-" + shots(k);
    case SchemeKind::zero_shot: return "0s";
    case SchemeKind::prior_prompt: break;
    }
    throw Error("prior_prompt names need a label source");
}

std::string suffixes(bool sedl, bool traindev) {
    std::string out;
    if (sedl) out += "-sedl";
    if (traindev) out += "-traindev";
    return out;
}

} // namespace

std::string label_source_name(const LabelSourceRef& source, bool traindev) {
    return base_name(source.kind, source.k) + suffixes(source.sedl, traindev);
}

std::string run_name(const RunManifest& manifest) {
    const auto& scheme = manifest.scheme;
    if (scheme.kind != SchemeKind::prior_prompt)
        return base_name(scheme.kind, manifest.k) + suffixes(scheme.sedl, manifest.traindev);
    if (!scheme.label_source) throw Error("prior_prompt manifest without a label source");
    const auto& src = *scheme.label_source;
    std::string prefix;
    switch (src.kind) {
    case SchemeKind::zero_shot: prefix = "0s"; break;
    case SchemeKind::prior_independent: prefix = "prior-" + shots(src.k); break;
    case SchemeKind::prior_uniform: prefix = "random-prior-" + shots(src.k); break;
    default: throw Error("unsupported label source for prior_prompt");
    }
    if (src.sedl) prefix += "-sedl";
    return prefix + "-prompt-" + shots(manifest.k) + suffixes(scheme.sedl, manifest.traindev);
}

std::string run_id(const RunManifest& manifest) {
    return run_name(manifest) + "/run-" + std::to_string(manifest.run_index);
}

} // namespace priorpull
