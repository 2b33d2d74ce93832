#include "sidequest/ledger.hpp"

#include "sidequest/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace sidequest {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool_call: return "tool_call";
    case Role::tool_response: return "tool_response";
    case Role::final_answer: return "final_answer";
    }
    return "user";
}

std::optional<Role> parse_role(std::string_view name) {
    for (Role r : {Role::user, Role::assistant, Role::tool_call, Role::tool_response, Role::final_answer}) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

std::string cursor_tag(CursorId id) { return "[Cursor " + std::to_string(id) + "]"; }

// --- LedgerView ----------------------------------------------------------

LedgerView::LedgerView() : state_(std::make_shared<const LedgerState>()) {}

LedgerView::LedgerView(std::shared_ptr<const LedgerState> state) : state_(std::move(state)) {
    if (!state_) state_ = std::make_shared<const LedgerState>();
}

const CursorRecord* LedgerView::find_cursor(CursorId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= state_->cursors.size()) return nullptr;
    return &state_->cursors[static_cast<std::size_t>(id)];
}

std::vector<CursorId> LedgerView::open_cursor_ids() const {
    std::vector<CursorId> ids;
    for (const auto& c : state_->cursors)
        if (c.open()) ids.push_back(c.id);
    return ids;
}

std::vector<const Message*> LedgerView::resident_messages() const {
    std::vector<const Message*> out;
    for (const auto& m : state_->messages)
        if (m.resident()) out.push_back(&m);
    return out;
}

// --- ContextLedger -------------------------------------------------------

ContextLedger::ContextLedger(std::shared_ptr<const Tokenizer> tokenizer) : tokenizer_(std::move(tokenizer)) {
    if (!tokenizer_) tokenizer_ = default_tokenizer();
}

const Message& ContextLedger::append(Role role, std::string text, int turn, std::optional<CursorId> cursor_id) {
    if (cursor_id.has_value() != (role == Role::tool_response)) {
        throw std::invalid_argument("cursor_id must be given exactly for tool_response messages");
    }
    const auto expected = static_cast<CursorId>(state_.cursors.size());
    if (cursor_id && *cursor_id != expected) {
        throw CursorIdGap("cursor id " + std::to_string(*cursor_id) + " appended, expected " +
                          std::to_string(expected));
    }

    Message msg;
    msg.id = state_.messages.size();
    msg.role = role;
    msg.span = {state_.total_appended, tokenizer_->count(text)};
    msg.text = std::move(text);
    msg.turn = turn;
    msg.cursor_id = cursor_id;

    state_.total_appended += msg.span.len;
    state_.resident += msg.span.len;
    state_.messages.push_back(std::move(msg));

    if (cursor_id) {
        const std::size_t idx = state_.messages.size() - 1;
        CursorRecord rec;
        rec.id = *cursor_id;
        rec.opened_turn = turn;
        rec.response_index = idx;
        rec.span = state_.messages[idx].span;
        if (idx > 0) {
            const Message& prev = state_.messages[idx - 1];
            if (prev.role == Role::tool_call && prev.turn == turn) {
                rec.call_index = idx - 1;
                rec.span = {prev.span.start, prev.span.len + rec.span.len};
            }
        }
        state_.cursors.push_back(rec);
    }
    return state_.messages.back();
}

ClearReport ContextLedger::clear_kv(std::span<const CursorId> cursor_ids, int turn) {
    ClearReport report;
    for (CursorId id : cursor_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= state_.cursors.size()) {
            report.skipped.push_back(id);
            continue;
        }
        CursorRecord& rec = state_.cursors[static_cast<std::size_t>(id)];
        if (!rec.open()) {
            report.skipped.push_back(id);
            continue;
        }
        rec.state = CursorState::evicted;
        rec.evicted_at_turn = turn;
        state_.messages[rec.response_index].evicted_at_turn = turn;
        if (rec.call_index) state_.messages[*rec.call_index].evicted_at_turn = turn;
        state_.resident -= rec.span.len;
        report.freed += rec.span.len;
        report.evicted.push_back(id);
    }
    return report;
}

const CursorRecord* ContextLedger::find_cursor(CursorId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= state_.cursors.size()) return nullptr;
    return &state_.cursors[static_cast<std::size_t>(id)];
}

LedgerView ContextLedger::snapshot() const { return LedgerView(std::make_shared<const LedgerState>(state_)); }

ContextLedger ContextLedger::from_messages(std::vector<Message> messages, std::shared_ptr<const Tokenizer> tokenizer) {
    ContextLedger ledger(std::move(tokenizer));
    for (std::size_t i = 0; i < messages.size(); ++i) {
        Message& m = messages[i];
        if (m.id != i) throw FormatError("message ids must be consecutive from 0");
        const std::optional<int> evicted = m.evicted_at_turn;
        const TokenSpan recorded = m.span;
        const Message& added = ledger.append(m.role, std::move(m.text), m.turn, m.cursor_id);
        if (added.span != recorded) {
            throw FormatError("message " + std::to_string(i) + " span does not match its text");
        }
        if (evicted) ledger.state_.messages.back().evicted_at_turn = evicted;
    }
    // Replay eviction marks onto cursors, requiring call/response agreement.
    for (auto& rec : ledger.state_.cursors) {
        const auto& resp = ledger.state_.messages[rec.response_index];
        if (rec.call_index && ledger.state_.messages[*rec.call_index].evicted_at_turn != resp.evicted_at_turn) {
            throw FormatError("cursor " + std::to_string(rec.id) + " call and response eviction marks differ");
        }
        if (resp.evicted_at_turn) {
            rec.state = CursorState::evicted;
            rec.evicted_at_turn = resp.evicted_at_turn;
            ledger.state_.resident -= rec.span.len;
        }
    }
    for (std::size_t i = 0; i < ledger.state_.messages.size(); ++i) {
        const auto& m = ledger.state_.messages[i];
        if (!m.evicted_at_turn) continue;
        const bool owned = std::any_of(ledger.state_.cursors.begin(), ledger.state_.cursors.end(),
                                       [&](const CursorRecord& c) { return c.response_index == i || c.call_index == i; });
        if (!owned) throw FormatError("message " + std::to_string(i) + " is evicted but belongs to no cursor");
    }
    return ledger;
}

} // namespace sidequest
