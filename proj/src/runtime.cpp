#include "sidequest/runtime.hpp"

#include "sidequest/error.hpp"
#include "sidequest/hindsight.hpp"

#include <algorithm>
#include <chrono>

namespace sidequest {

void RunConfig::validate() const {
    if (trigger_interval < 1) throw ConfigError("trigger_interval must be >= 1");
    if (max_turns < 1) throw ConfigError("max_turns must be >= 1");
    if (aux_latency_turns < 1) throw ConfigError("aux_latency_turns must be >= 1");
    if (unparsable_retries < 0) throw ConfigError("unparsable_retries must be >= 0");
    if (aux_enabled && trigger_phrase.empty()) throw ConfigError("trigger_phrase must not be empty");
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::aux_spawn: return "aux_spawn";
    case EventKind::aux_applied: return "aux_applied";
    case EventKind::aux_failed: return "aux_failed";
    case EventKind::eviction: return "eviction";
    case EventKind::main_output: return "main_output";
    case EventKind::retry: return "retry";
    case EventKind::tool_output: return "tool_output";
    case EventKind::final_answer: return "final_answer";
    case EventKind::stop: return "stop";
    }
    return "stop";
}

Runtime::Runtime(Policy& policy, ToolBackend& tools, RunConfig config, Evictor* evictor,
                 std::shared_ptr<const Tokenizer> tokenizer)
    : policy_(policy),
      tools_(tools),
      config_(std::move(config)),
      evictor_(evictor),
      tokenizer_(tokenizer ? std::move(tokenizer) : default_tokenizer()),
      ledger_(tokenizer_),
      metrics_(config_.aux_accounting, config_.charge_shared_once) {
    config_.validate();
}

Runtime::~Runtime() {
    if (pending_ && pending_->future.valid()) pending_->future.wait();
}

void Runtime::event(EventKind kind, std::string detail) { result_.events.push_back({turn_, kind, std::move(detail)}); }

bool Runtime::append_checked(Role role, std::string text, std::optional<CursorId> cursor) {
    ledger_.append(role, std::move(text), turn_, cursor);
    metrics_.observe_resident(ledger_.resident_tokens());
    return ledger_.resident_tokens() <= config_.max_resident;
}

void Runtime::meter_main(std::size_t gen_tokens) {
    const std::size_t resident = ledger_.resident_tokens();
    for (std::size_t i = 0; i < gen_tokens; ++i) metrics_.record_decode_step(ThreadKind::main, resident + i);
}

bool Runtime::aux_ready() const {
    if (!pending_) return false;
    if (config_.aux_schedule == AuxSchedule::simulated) {
        return turn_ >= pending_->info.spawn_turn + config_.aux_latency_turns;
    }
    return pending_->future.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
}

void Runtime::settle_aux(Pending& p) {
    try {
        const PolicyOutput out = p.future.get();
        p.info.raw_text = out.raw_text;
        p.info.gen_tokens = out.gen_token_count;
        const auto decision = sidequest_evictor(out);
        if (decision.failed) {
            p.info.status = AuxStatus::failed;
            p.info.error = "unparsable aux output";
        } else {
            p.info.status = AuxStatus::finished;
            p.info.command = decision.command;
        }
    } catch (const Error& e) {
        p.info.status = AuxStatus::failed;
        p.info.error = e.what();
    }
    metrics_.record_aux_generation(p.info.snapshot_resident, p.info.trigger_tokens, p.info.gen_tokens);
}

std::size_t Runtime::apply_pending_eviction() {
    if (!pending_ || !aux_ready()) return 0;
    Pending p = std::move(*pending_);
    pending_.reset();
    settle_aux(p);

    std::size_t freed = 0;
    if (p.info.status == AuxStatus::finished) {
        // Ids the thread could not have seen are never applied.
        std::vector<CursorId> known, unknown;
        for (CursorId id : p.info.command->cursor_ids) {
            (id >= 0 && static_cast<std::size_t>(id) < p.info.snapshot_cursors ? known : unknown).push_back(id);
        }
        const ClearReport report = ledger_.clear_kv(known, turn_);
        freed = report.freed;
        p.info.applied_turn = turn_;
        if (!p.info.command->empty()) {
            EvictionLogEntry entry;
            entry.turn = turn_;
            entry.cursor_ids = report.evicted;
            entry.freed = report.freed;
            entry.skipped = report.skipped;
            entry.skipped.insert(entry.skipped.end(), unknown.begin(), unknown.end());
            entry.spawn_turn = p.info.spawn_turn;
            result_.eviction_log.push_back(std::move(entry));
        }
        event(EventKind::aux_applied, "spawn_turn=" + std::to_string(p.info.spawn_turn) + " command=" +
                                          render_command(*p.info.command) + " freed=" + std::to_string(freed));
    } else {
        event(EventKind::aux_failed, "spawn_turn=" + std::to_string(p.info.spawn_turn) + " " + p.info.error);
    }
    result_.aux_threads.push_back(std::move(p.info));
    return freed;
}

bool Runtime::spawn_aux() {
    if (pending_ || turn_ % config_.trigger_interval != 0) return false;
    Pending p;
    LedgerView snapshot = ledger_.snapshot();
    p.info.spawn_turn = turn_;
    p.info.snapshot_resident = snapshot.resident_tokens();
    p.info.snapshot_cursors = snapshot.cursors().size();
    p.info.trigger_tokens = tokenizer_->count(config_.trigger_phrase);
    PolicyRequest request = aux_request(std::move(snapshot), config_.trigger_phrase);
    Policy* policy = &policy_;
    p.future = std::async(std::launch::async, [policy, request = std::move(request)] { return policy->generate(request); });
    pending_ = std::move(p);
    event(EventKind::aux_spawn, "snapshot_resident=" + std::to_string(pending_->info.snapshot_resident));
    return true;
}

std::size_t Runtime::apply_sync_evictor() {
    if (!evictor_) return 0;
    const EvictionCommand cmd = evictor_->at_loop_top(ledger_.snapshot(), turn_).normalized();
    if (cmd.empty()) return 0;
    const ClearReport report = ledger_.clear_kv(cmd.cursor_ids, turn_);
    EvictionLogEntry entry;
    entry.turn = turn_;
    entry.cursor_ids = report.evicted;
    entry.freed = report.freed;
    entry.skipped = report.skipped;
    result_.eviction_log.push_back(std::move(entry));
    event(EventKind::eviction, render_command(cmd) + " freed=" + std::to_string(report.freed));
    return report.freed;
}

void Runtime::finish(RunRecord record) {
    if (pending_) {
        // The run ended with a thread in flight: its tokens were still spent.
        Pending p = std::move(*pending_);
        pending_.reset();
        settle_aux(p);
        result_.aux_threads.push_back(std::move(p.info));
    }
    const CompletionOutcome outcome = classify_outcome(record);
    metrics_.set_outcome(outcome.kind);
    result_.metrics = metrics_.metrics();
    std::vector<DiscardedOutput> discarded = std::move(result_.trace.discarded);
    result_.trace = make_trace(config_.run_id, result_.trace.task, ledger_, std::string(to_string(outcome.kind)));
    result_.trace.discarded = std::move(discarded);
    event(EventKind::stop, std::string(to_string(outcome.kind)));
}

RunResult Runtime::run(const std::string& query) {
    result_ = RunResult{};
    result_.trace.task = query;
    ledger_ = ContextLedger(tokenizer_);
    metrics_ = MetricsRecorder(config_.aux_accounting, config_.charge_shared_once);
    pending_.reset();
    turn_ = 0;
    tools_.reset();

    RunRecord record;
    if (!append_checked(Role::user, query)) {
        record.context_exceeded = true;
        finish(record);
        return std::move(result_);
    }

    while (true) {
        result_.turns = turn_ + 1;

        // Phase 1: apply evictions decided since the last iteration.
        apply_pending_eviction();
        apply_sync_evictor();

        // Phase 2: fork an auxiliary thread on the shared context.
        if (config_.aux_enabled) spawn_aux();

        // Phase 3: one ReAct step of the main thread.
        PolicyOutput out;
        for (int attempt = 0;; ++attempt) {
            try {
                out = policy_.generate(main_request(ledger_.snapshot()));
            } catch (const Error& e) {
                result_.diagnostic = e.what();
                record.policy_error = true;
                finish(record);
                return std::move(result_);
            }
            meter_main(out.gen_token_count);
            if (!std::holds_alternative<Unparsable>(out.parsed) || attempt >= config_.unparsable_retries) break;
            result_.trace.discarded.push_back({turn_, out.raw_text});
            event(EventKind::retry, std::get<Unparsable>(out.parsed).reason);
        }
        event(EventKind::main_output, std::to_string(out.gen_token_count) + " tokens");

        if (const auto* fin = std::get_if<FinalAnswerParse>(&out.parsed)) {
            if (!append_checked(Role::final_answer, out.raw_text)) {
                record.context_exceeded = true;
            } else {
                record.final_answer = true;
                result_.final_answer = fin->answer;
                event(EventKind::final_answer, fin->answer);
            }
            finish(record);
            return std::move(result_);
        }

        if (const auto* call = std::get_if<ToolCallParse>(&out.parsed)) {
            bool within = true;
            if (!call->thought.empty()) within = append_checked(Role::assistant, call->thought);
            within = append_checked(Role::tool_call, call->block) && within;
            if (within) {
                ToolOutput tool_out = tools_.execute(call->call);
                const CursorId id = tool_out.cursor_id;
                within = append_checked(Role::tool_response, std::move(tool_out.text), id);
                event(EventKind::tool_output, cursor_tag(id));
            }
            if (!within) {
                record.context_exceeded = true;
                finish(record);
                return std::move(result_);
            }
        } else {
            // Neither a tool call nor a final answer: the turn ends the run.
            if (!append_checked(Role::assistant, out.raw_text)) record.context_exceeded = true;
            record.unparsable = true;
            result_.diagnostic = std::get<Unparsable>(out.parsed).reason;
            finish(record);
            return std::move(result_);
        }

        ++turn_;
        if (turn_ >= config_.max_turns) {
            record.turn_limit_reached = true;
            finish(record);
            return std::move(result_);
        }
    }
}

RunResult run(const std::string& query, Policy& policy, ToolBackend& tools, const RunConfig& config, Evictor* evictor) {
    Runtime runtime(policy, tools, config, evictor);
    return runtime.run(query);
}

} // namespace sidequest
