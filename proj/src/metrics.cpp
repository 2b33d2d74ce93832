#include "sidequest/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <ostream>

namespace sidequest {

std::string_view to_string(AuxAccounting mode) {
    return mode == AuxAccounting::naive ? "naive" : "shared_prefix";
}

std::optional<AuxAccounting> parse_aux_accounting(std::string_view name) {
    if (name == "naive") return AuxAccounting::naive;
    if (name == "shared_prefix") return AuxAccounting::shared_prefix;
    return std::nullopt;
}

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
    case OutcomeKind::completed: return "completed";
    case OutcomeKind::unparsable: return "unparsable";
    case OutcomeKind::context_limit: return "context_limit";
    case OutcomeKind::turn_limit: return "turn_limit";
    case OutcomeKind::policy_error: return "policy_error";
    }
    return "completed";
}

std::optional<OutcomeKind> parse_outcome(std::string_view name) {
    for (auto k : {OutcomeKind::completed, OutcomeKind::unparsable, OutcomeKind::context_limit,
                   OutcomeKind::turn_limit, OutcomeKind::policy_error}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::uint64_t aux_read_cost(std::uint64_t shared_len, std::uint64_t aux_suffix_len, AuxAccounting mode,
                            bool first_step, bool charge_shared_once) {
    if (mode == AuxAccounting::naive) return shared_len + aux_suffix_len;
    return aux_suffix_len + ((first_step && charge_shared_once) ? shared_len : 0);
}

MetricsRecorder::MetricsRecorder(AuxAccounting aux_mode, bool charge_shared_once)
    : aux_mode_(aux_mode), charge_shared_once_(charge_shared_once) {}

void MetricsRecorder::record_decode_step(ThreadKind thread, std::uint64_t resident_at_step) {
    if (thread == ThreadKind::main) {
        metrics_.kv_reads_main += resident_at_step;
        ++metrics_.decode_tokens_main;
        observe_resident(resident_at_step);
    } else {
        metrics_.kv_reads_aux += resident_at_step;
        ++metrics_.decode_tokens_aux;
    }
}

void MetricsRecorder::record_aux_generation(std::uint64_t shared_len, std::uint64_t trigger_len,
                                            std::uint64_t gen_tokens) {
    for (std::uint64_t i = 0; i < gen_tokens; ++i) {
        const std::uint64_t suffix = trigger_len + i;
        const bool first = i == 0;
        const auto naive = aux_read_cost(shared_len, suffix, AuxAccounting::naive, first, charge_shared_once_);
        const auto shared =
            aux_read_cost(shared_len, suffix, AuxAccounting::shared_prefix, first, charge_shared_once_);
        metrics_.kv_reads_aux_naive += naive;
        metrics_.kv_reads_aux_shared_prefix += shared;
        record_decode_step(ThreadKind::aux, aux_mode_ == AuxAccounting::naive ? naive : shared);
    }
}

void MetricsRecorder::observe_resident(std::uint64_t resident) {
    metrics_.peak_resident = std::max(metrics_.peak_resident, resident);
}

CompletionOutcome classify_outcome(const RunRecord& record) {
    if (record.final_answer) return {OutcomeKind::completed};
    if (record.context_exceeded) return {OutcomeKind::context_limit};
    if (record.turn_limit_reached) return {OutcomeKind::turn_limit};
    if (record.policy_error) return {OutcomeKind::policy_error};
    return {OutcomeKind::unparsable};
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
    out << "run_id,strategy,peak_resident,kv_reads_main,kv_reads_aux,decode_tokens,outcome,"
           "kv_reads_aux_naive,kv_reads_aux_shared_prefix,decode_tokens_main,decode_tokens_aux\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << csv_field(r.run_id) << ',' << csv_field(r.strategy) << ',' << m.peak_resident << ','
            << m.kv_reads_main << ',' << m.kv_reads_aux << ',' << m.decode_tokens() << ','
            << to_string(m.outcome.kind) << ',' << m.kv_reads_aux_naive << ',' << m.kv_reads_aux_shared_prefix
            << ',' << m.decode_tokens_main << ',' << m.decode_tokens_aux << '\n';
    }
}

void write_report_json(std::ostream& out, const std::vector<ReportRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        nlohmann::ordered_json j;
        j["run_id"] = r.run_id;
        j["strategy"] = r.strategy;
        j["peak_resident"] = m.peak_resident;
        j["kv_reads_main"] = m.kv_reads_main;
        j["kv_reads_aux"] = m.kv_reads_aux;
        j["decode_tokens"] = m.decode_tokens();
        j["outcome"] = std::string(to_string(m.outcome.kind));
        j["kv_reads_aux_naive"] = m.kv_reads_aux_naive;
        j["kv_reads_aux_shared_prefix"] = m.kv_reads_aux_shared_prefix;
        j["decode_tokens_main"] = m.decode_tokens_main;
        j["decode_tokens_aux"] = m.decode_tokens_aux;
        arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
}

} // namespace sidequest
