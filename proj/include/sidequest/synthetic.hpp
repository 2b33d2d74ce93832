#pragma once

#include "sidequest/tools.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sidequest {

// A task whose main-thread (and optionally aux-thread) responses are fixed
// in advance.
struct ScriptedTask {
    std::string task_id;
    std::string query;
    std::vector<std::string> main_script;
    std::vector<std::string> aux_script;
    // Last turn at which each cursor is referenced, as designed by the
    // generator (empty for hand-written tasks).
    std::map<int, int> designed_last_use;
};

struct Workload {
    std::vector<Document> documents;
    std::vector<ScriptedTask> tasks;
};

// The search -> open -> follow-up search -> final walkthrough: cursor 0
// (search hits) stops mattering once cursor 1 (the event page) is open,
// cursor 1 and cursor 2 are cited in the answer. The aux script is laid
// out for trigger interval 1 and one-turn aux latency, and deletes cursor 0
// from the thread spawned at turn 1.
Workload walkthrough_workload();

enum class TurnDistribution { uniform, lognormal };

struct WorkloadConfig {
    std::uint64_t seed = 7;
    std::size_t tasks = 20;
    // Total loop iterations per task, the final-answer turn included.
    TurnDistribution turns = TurnDistribution::uniform;
    int min_turns = 8;
    int max_turns = 16;
    double lognormal_median = 18.0;
    double lognormal_sigma = 0.6;
    // Size of every tool output (header included), in tokens.
    std::size_t min_output_tokens = 400;
    std::size_t max_output_tokens = 800;
    // A cursor opened at turn o is last referenced at o + gap, gap drawn
    // uniformly from [0, max_reuse_gap] and capped at the final turn.
    int max_reuse_gap = 2;
    std::size_t min_thought_tokens = 8;
    std::size_t max_thought_tokens = 24;
    std::size_t chunk_tokens = 2000;
};

// Every non-final turn opens a fresh document; thoughts cite the cursors
// that are still in use; the final answer cites the cursors whose reuse
// window reaches the final turn.
Workload generate_workload(const WorkloadConfig& config);

// Aux responses for a task under trigger interval K and aux latency L:
// the thread spawned at s deletes every cursor opened before s whose
// designed last use is before s + L.
std::vector<std::string> hindsight_aux_script(const ScriptedTask& task, int interval, int latency = 1);

void write_corpus_jsonl(std::ostream& out, const std::vector<Document>& docs);
void write_tasks_jsonl(std::ostream& out, const std::vector<ScriptedTask>& tasks);
std::vector<ScriptedTask> read_tasks_jsonl(std::istream& in);
std::vector<ScriptedTask> read_tasks_file(const std::string& path);

} // namespace sidequest
