#pragma once

#include "sidequest/evictors.hpp"
#include "sidequest/ledger.hpp"
#include "sidequest/metrics.hpp"
#include "sidequest/policy.hpp"
#include "sidequest/tools.hpp"
#include "sidequest/trace.hpp"

#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sidequest {

// `simulated`: an aux thread counts as finished once `aux_latency_turns`
// main iterations have passed since it was spawned, independent of wall
// clock. `live`: finished when its generation has actually returned.
enum class AuxSchedule { simulated, live };

struct RunConfig {
    std::string run_id = "run";
    int trigger_interval = 4;
    std::string trigger_phrase = std::string(kDefaultTriggerPhrase);
    int max_turns = 64;
    std::size_t max_resident = 131072;
    bool aux_enabled = false;
    AuxAccounting aux_accounting = AuxAccounting::naive;
    bool charge_shared_once = true;
    AuxSchedule aux_schedule = AuxSchedule::simulated;
    int aux_latency_turns = 1;
    int unparsable_retries = 1;

    // Throws ConfigError.
    void validate() const;
};

enum class AuxStatus { running, finished, failed };

struct AuxThread {
    int spawn_turn = 0;
    std::size_t snapshot_resident = 0;  // shared prefix length
    std::size_t snapshot_cursors = 0;   // ids >= this were not visible to the thread
    std::size_t trigger_tokens = 0;
    std::size_t gen_tokens = 0;
    AuxStatus status = AuxStatus::running;
    std::optional<EvictionCommand> command;  // set iff finished
    std::optional<int> applied_turn;
    std::string raw_text;
    std::string error;
};

struct EvictionLogEntry {
    int turn = 0;
    std::vector<CursorId> cursor_ids;  // cursors actually evicted
    std::size_t freed = 0;
    std::vector<CursorId> skipped;
    std::optional<int> spawn_turn;     // aux-driven entries only
};

enum class EventKind {
    aux_spawn,
    aux_applied,
    aux_failed,
    eviction,
    main_output,
    retry,
    tool_output,
    final_answer,
    stop,
};

std::string_view to_string(EventKind kind);

struct RunEvent {
    int turn = 0;
    EventKind kind = EventKind::main_output;
    std::string detail;
};

struct RunResult {
    std::optional<std::string> final_answer;
    RunMetrics metrics;
    Trace trace;
    std::vector<EvictionLogEntry> eviction_log;
    std::vector<AuxThread> aux_threads;
    std::vector<RunEvent> events;
    std::string diagnostic;
    int turns = 0;  // loop iterations started
};

// One execution of the SideQuest loop. `evictor` (optional) is consulted
// synchronously at the top of each iteration; the auxiliary thread is
// governed by config.aux_enabled.
class Runtime {
public:
    Runtime(Policy& policy, ToolBackend& tools, RunConfig config, Evictor* evictor = nullptr,
            std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());
    ~Runtime();
    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    RunResult run(const std::string& query);

    // Loop-top step: applies a finished aux thread's command. Returns tokens
    // freed; 0 while the thread is running or absent.
    std::size_t apply_pending_eviction();
    // Forks the current context for the aux thread when t mod K == 0 and no
    // thread is in flight. Returns whether a thread was started.
    bool spawn_aux();

    const ContextLedger& ledger() const { return ledger_; }
    int turn() const { return turn_; }
    bool aux_in_flight() const { return pending_.has_value(); }

private:
    struct Pending {
        AuxThread info;
        std::future<PolicyOutput> future;
    };

    bool aux_ready() const;
    void settle_aux(Pending& p);
    std::size_t apply_sync_evictor();
    void meter_main(std::size_t gen_tokens);
    bool append_checked(Role role, std::string text, std::optional<CursorId> cursor = std::nullopt);
    void event(EventKind kind, std::string detail = {});
    void finish(RunRecord record);

    Policy& policy_;
    ToolBackend& tools_;
    RunConfig config_;
    Evictor* evictor_;
    std::shared_ptr<const Tokenizer> tokenizer_;

    ContextLedger ledger_;
    MetricsRecorder metrics_;
    int turn_ = 0;
    std::optional<Pending> pending_;
    RunResult result_;
};

RunResult run(const std::string& query, Policy& policy, ToolBackend& tools, const RunConfig& config,
              Evictor* evictor = nullptr);

} // namespace sidequest
