#pragma once

#include "sidequest/ledger.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sidequest {

// A main-thread response that was generated but not kept (a retried
// unparsable output). Needed to replay a run exactly.
struct DiscardedOutput {
    int turn = 0;
    std::string text;
    friend bool operator==(const DiscardedOutput&, const DiscardedOutput&) = default;
};

// Full, immutable history of one run, evicted content included.
struct Trace {
    std::string trace_id;
    std::string task;
    std::vector<Message> messages;
    std::optional<bool> correct;
    std::vector<CursorId> final_citations;
    std::string outcome;
    std::vector<DiscardedOutput> discarded;

    int final_turn() const;
    std::size_t cursor_count() const;
    friend bool operator==(const Trace&, const Trace&) = default;
};

// All cursor ids referenced as "[Cursor N]" in text, ascending, no duplicates.
std::vector<CursorId> cited_cursors(std::string_view text);

Trace make_trace(std::string trace_id, std::string task, const ContextLedger& ledger, std::string outcome = {});

// JSONL: a header object {"trace_id", "task", "correct", "final_citations",
// "outcome", "discarded"} followed by one message object per line with
// fields {id, role, text, turn, cursor_id, span_start, span_len,
// evicted_at_turn}. Several traces may follow each other in one file.
void write_trace(std::ostream& out, const Trace& trace);
std::string trace_to_jsonl(const Trace& trace);
std::vector<Trace> read_traces(std::istream& in);
std::vector<Trace> read_traces_file(const std::string& path);
void write_traces_file(const std::string& path, const std::vector<Trace>& traces);

// Accepts either a JSON object {"trace_id": bool, ...} or JSONL lines
// {"trace_id": ..., "correct": bool}.
std::map<std::string, bool> read_verdicts(std::istream& in);
std::map<std::string, bool> read_verdicts_file(const std::string& path);

} // namespace sidequest
