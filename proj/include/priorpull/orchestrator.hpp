#pragma once

#include "priorpull/analysis.hpp"
#include "priorpull/config.hpp"
#include "priorpull/corpus.hpp"
#include "priorpull/model.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace priorpull {

/// Dataset splits after pooling and subsampling.
struct LoadedData {
    EmotionTaxonomy taxonomy;
    std::map<Split, MultilabelDataset> splits;

    const MultilabelDataset& split(Split s) const;
    // Several splits concatenated in the given order.
    MultilabelDataset combined(const std::vector<Split>& which) const;
};

LoadedData load_data(const DatasetSpec& spec);

struct PlannedRun {
    RunManifest manifest;
    bool requested = true;  // false for prior runs inserted as label sources
};

/// Every run an experiment needs, label-source runs before the prior-prompt
/// runs that read them.
std::vector<PlannedRun> plan_runs(const ExperimentConfig& config, const std::string& template_ref);

// Group names in plan order, label-source groups included.
std::vector<std::string> plan_groups(const std::vector<PlannedRun>& plan);

struct OrchestratorOptions {
    bool offline = false;
    std::optional<std::size_t> concurrency;
    std::optional<std::filesystem::path> out_dir;
    // Reuse persisted run files whose manifest matches; replay turns this off
    // so predictions are rebuilt from transcripts.
    bool reuse_runs = true;
    // Only load persisted runs; never call the model.
    bool persisted_only = false;
    // Subset of analyses to emit; empty means the config's list.
    std::vector<std::string> analyses;
    // Test hook: replaces the backend built from the endpoint.
    std::shared_ptr<CompletionBackend> backend;
    std::ostream* log = nullptr;
};

struct OrchestratorResult {
    int exit_status = 0;
    std::size_t runs_executed = 0;
    std::size_t runs_loaded = 0;
    std::size_t runs_failed = 0;
    std::size_t runs_skipped = 0;  // dependents of failed runs
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::vector<std::string> failures;
    std::vector<std::filesystem::path> reports;
};

/// Executes (or loads) every planned run and writes the requested reports
/// under <out>/reports. Failed runs halt their dependents only; the exit
/// status is non-zero when anything failed.
OrchestratorResult orchestrate(const ExperimentConfig& config, const OrchestratorOptions& options = {});

// Persisted location of a run: <out>/runs/<run name>/run-<index>.json.
std::filesystem::path run_path(const std::filesystem::path& out_dir, const RunManifest& manifest);

/// Writes the reports for a set of completed runs. `runs` must be keyed by
/// run id; evaluation views are restricted to `eval` ids.
std::vector<std::filesystem::path> write_reports(const ExperimentConfig& config,
                                                 const std::vector<PlannedRun>& plan,
                                                 const std::map<std::string, PredictionSet>& runs,
                                                 const MultilabelDataset& eval,
                                                 const std::vector<std::string>& analyses,
                                                 const std::filesystem::path& report_dir);

} // namespace priorpull
