#pragma once

#include "sidequest/evictors.hpp"
#include "sidequest/hindsight.hpp"
#include "sidequest/metrics.hpp"
#include "sidequest/runtime.hpp"
#include "sidequest/synthetic.hpp"
#include "sidequest/tools.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sidequest {

struct ExperimentSpec {
    std::string tasks_path;
    std::string corpus_path;
    std::vector<std::string> strategies = {"none"};
    int runs_per_task = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "results";
    int jobs = 1;

    RunConfig run;
    BudgetPolicy budget;
    ToolConfig tools;
    // Tasks without a main script (or all tasks when `live_only`) are sent
    // to this endpoint.
    std::optional<HttpPolicyConfig> endpoint;
    bool live_only = false;

    void validate() const;
};

// Overlays keys of a JSON config object onto `spec`. Recognized keys mirror
// RunConfig plus "budget", "tools", "endpoint" and the ExperimentSpec fields.
void apply_config(const nlohmann::json& config, ExperimentSpec& spec);
void apply_config_file(const std::string& path, ExperimentSpec& spec);

struct StrategySummary {
    std::string strategy;
    std::size_t runs = 0;
    double mean_peak_resident = 0;
    double mean_kv_reads_main = 0;
    double mean_kv_reads_aux = 0;
    double mean_kv_reads_aux_naive = 0;
    double mean_kv_reads_aux_shared_prefix = 0;
    double mean_kv_reads_total = 0;
    double mean_decode_tokens = 0;
    std::map<std::string, std::size_t> outcomes;
    // Relative to the "none" strategy, in percent; absent without a baseline.
    std::optional<double> peak_reduction_pct;
    std::optional<double> kv_reads_reduction_pct;
    std::optional<double> kv_reads_reduction_naive_pct;
    std::optional<double> kv_reads_reduction_shared_prefix_pct;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::vector<StrategySummary> summary;
    std::vector<Trace> traces;
    std::vector<std::string> failures;  // "run_id: diagnostic"
};

// Runs every (task, strategy, repetition) in memory. The oracle strategy
// uses the trace of the same task's uncompressed run as hindsight.
ExperimentReport run_experiment(const std::vector<ScriptedTask>& tasks, std::shared_ptr<const Corpus> corpus,
                                const ExperimentSpec& spec);

std::vector<StrategySummary> summarize(const std::vector<ReportRow>& rows, const std::vector<std::string>& order);
std::string summary_json(const std::vector<StrategySummary>& summary);
std::string summary_csv(const std::vector<StrategySummary>& summary);

// Loads inputs, runs, and writes runs.csv, runs.json, summary.json,
// summary.csv and traces.jsonl into spec.output_dir.
ExperimentReport cmd_run(const ExperimentSpec& spec);

struct GenDataOptions {
    std::string traces_path;
    std::string verdicts_path;  // optional
    std::string out_path = "dataset.jsonl";
    std::string manifest_path;  // default: <out_path>.manifest.json
    DatasetConfig dataset;
    bool synthetic_logits = false;
    std::size_t logits_top_k = 20;
    std::optional<ChatEndpointConfig> annotator_endpoint;
};

// Verdicts may be keyed by trace id or by the task id in front of the
// first '#' of a run-generated trace id.
std::map<std::string, bool> resolve_verdicts(const std::vector<Trace>& traces, const std::map<std::string, bool>& raw);

DatasetResult cmd_gen_data(const GenDataOptions& options);

struct ReplayOptions {
    StrategySpec strategy;
    RunConfig run;
    BudgetPolicy budget;
    std::vector<std::string> aux_script;  // recorded aux outputs
    Policy* aux_policy = nullptr;         // or a live policy for aux calls
};

// The recorded main-thread outputs, in call order (retried outputs first).
std::vector<std::string> recorded_main_outputs(const Trace& trace);

// Re-executes a recorded run under another strategy, feeding back the
// recorded main outputs and tool responses. Throws ReplayUnsupported when
// the strategy needs data the trace does not carry.
RunResult replay_trace(const Trace& trace, const ReplayOptions& options);
RunMetrics cmd_replay(const std::string& trace_path, const ReplayOptions& options);

// Human-readable summary: messages, cursors with spans and last use,
// expired sets per turn.
std::string inspect_trace(const Trace& trace);

} // namespace sidequest
