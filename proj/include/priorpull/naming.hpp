#pragma once

#include "priorpull/analysis.hpp"
#include "priorpull/sampling.hpp"

#include <string>

namespace priorpull {

/// Group name of a run:
///   {k}s, cossim-{k}s, random-prior-{k}s, proxy-prior-{k}s, 0s,
///   prior-{y}s-prompt-{k}s, random-prior-{y}s-prompt-{k}s, 0s-prompt-{k}s,
/// plus optional -sedl and -traindev suffixes. All runs of a group share it.
std::string run_name(const RunManifest& manifest);

// Unique within an experiment: "<run_name>/run-<index>".
std::string run_id(const RunManifest& manifest);

// Name of the prior group that supplies prompt labels.
std::string label_source_name(const LabelSourceRef& source, bool traindev);

} // namespace priorpull
