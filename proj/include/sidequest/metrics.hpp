#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sidequest {

enum class ThreadKind { main, aux };

// How auxiliary decode steps are charged for the prefix they share with the
// main context. `naive` re-reads the whole prefix every step; `shared_prefix`
// models a cascade-style kernel that loads it once.
enum class AuxAccounting { naive, shared_prefix };

std::string_view to_string(AuxAccounting mode);
std::optional<AuxAccounting> parse_aux_accounting(std::string_view name);

enum class OutcomeKind { completed, unparsable, context_limit, turn_limit, policy_error };

std::string_view to_string(OutcomeKind kind);
std::optional<OutcomeKind> parse_outcome(std::string_view name);

struct CompletionOutcome {
    OutcomeKind kind = OutcomeKind::completed;
    friend bool operator==(const CompletionOutcome&, const CompletionOutcome&) = default;
};

// Units are token-reads: one resident token loaded for one generated token.
struct RunMetrics {
    std::uint64_t peak_resident = 0;
    std::uint64_t kv_reads_main = 0;
    std::uint64_t kv_reads_aux = 0;  // under the run's configured accounting mode
    std::uint64_t kv_reads_aux_naive = 0;
    std::uint64_t kv_reads_aux_shared_prefix = 0;
    std::uint64_t decode_tokens_main = 0;
    std::uint64_t decode_tokens_aux = 0;
    CompletionOutcome outcome;

    std::uint64_t kv_reads_total() const { return kv_reads_main + kv_reads_aux; }
    std::uint64_t decode_tokens() const { return decode_tokens_main + decode_tokens_aux; }
    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

// Reads charged to one auxiliary decode step. With `shared_prefix`, the
// shared part is paid only on the first step when `charge_shared_once` is
// set (and never otherwise).
std::uint64_t aux_read_cost(std::uint64_t shared_len, std::uint64_t aux_suffix_len, AuxAccounting mode,
                            bool first_step, bool charge_shared_once = true);

class MetricsRecorder {
public:
    explicit MetricsRecorder(AuxAccounting aux_mode = AuxAccounting::naive, bool charge_shared_once = true);

    // One generated token on `thread` that attended to `resident_at_step`
    // cached tokens. Main-thread steps also feed the peak.
    void record_decode_step(ThreadKind thread, std::uint64_t resident_at_step);

    // Accounts a whole auxiliary generation forked from a context of
    // `shared_len` tokens, with `trigger_len` trigger tokens appended.
    // Both accounting modes are accumulated; kv_reads_aux follows the
    // configured one.
    void record_aux_generation(std::uint64_t shared_len, std::uint64_t trigger_len, std::uint64_t gen_tokens);

    void observe_resident(std::uint64_t resident);
    void set_outcome(OutcomeKind kind) { metrics_.outcome.kind = kind; }

    const RunMetrics& metrics() const { return metrics_; }
    AuxAccounting aux_mode() const { return aux_mode_; }

private:
    RunMetrics metrics_;
    AuxAccounting aux_mode_;
    bool charge_shared_once_;
};

// What the runtime observed when a run ended.
struct RunRecord {
    bool final_answer = false;
    bool context_exceeded = false;
    bool turn_limit_reached = false;
    bool unparsable = false;
    bool policy_error = false;
};

CompletionOutcome classify_outcome(const RunRecord& record);

struct ReportRow {
    std::string run_id;
    std::string strategy;
    RunMetrics metrics;
};

// One row per run. Columns: run_id, strategy, peak_resident, kv_reads_main,
// kv_reads_aux, decode_tokens, outcome, then the per-mode aux reads and the
// per-thread decode counts.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
void write_report_json(std::ostream& out, const std::vector<ReportRow>& rows);

} // namespace sidequest
