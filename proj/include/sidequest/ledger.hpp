#pragma once

#include "sidequest/tokenizer.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sidequest {

enum class Role { user, assistant, tool_call, tool_response, final_answer };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view name);

using CursorId = int;

// Half-open range [start, start + len) of absolute ledger positions.
struct TokenSpan {
    std::size_t start = 0;
    std::size_t len = 0;

    std::size_t end() const { return start + len; }
    bool overlaps(const TokenSpan& other) const {
        return len > 0 && other.len > 0 && start < other.end() && other.start < end();
    }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Message {
    std::uint64_t id = 0;
    Role role = Role::user;
    std::string text;
    TokenSpan span;
    int turn = 0;
    std::optional<CursorId> cursor_id;
    std::optional<int> evicted_at_turn;

    bool resident() const { return !evicted_at_turn.has_value(); }
    friend bool operator==(const Message&, const Message&) = default;
};

enum class CursorState { open, evicted };

// A tool call together with the response it produced. The span covers both
// messages; they are evicted as a unit.
struct CursorRecord {
    CursorId id = 0;
    int opened_turn = 0;
    TokenSpan span;
    CursorState state = CursorState::open;
    std::optional<int> evicted_at_turn;
    std::optional<std::size_t> call_index;  // index into messages, if a tool_call preceded
    std::size_t response_index = 0;

    bool open() const { return state == CursorState::open; }
};

// "[Cursor 3]" -- the literal tag used to reference a cursor in text.
std::string cursor_tag(CursorId id);

struct ClearReport {
    std::size_t freed = 0;
    std::vector<CursorId> evicted;
    std::vector<CursorId> skipped;
};

struct LedgerState {
    std::vector<Message> messages;
    std::vector<CursorRecord> cursors;
    std::size_t total_appended = 0;
    std::size_t resident = 0;
};

// Frozen copy of the ledger. Later appends or evictions on the live ledger
// never show up here.
class LedgerView {
public:
    LedgerView();
    explicit LedgerView(std::shared_ptr<const LedgerState> state);

    std::span<const Message> messages() const { return state_->messages; }
    std::span<const CursorRecord> cursors() const { return state_->cursors; }
    std::size_t total_appended() const { return state_->total_appended; }
    std::size_t resident_tokens() const { return state_->resident; }

    const CursorRecord* find_cursor(CursorId id) const;
    std::vector<CursorId> open_cursor_ids() const;
    std::vector<const Message*> resident_messages() const;
    CursorId next_cursor_id() const { return static_cast<CursorId>(state_->cursors.size()); }

    const LedgerState& state() const { return *state_; }

private:
    std::shared_ptr<const LedgerState> state_;
};

class ContextLedger {
public:
    explicit ContextLedger(std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());

    // Appends a message at the end of the ledger. A tool_response must carry
    // the next cursor id; when it directly follows a tool_call of the same
    // turn the two are paired into one cursor.
    const Message& append(Role role, std::string text, int turn,
                          std::optional<CursorId> cursor_id = std::nullopt);

    // Evicts every listed cursor that is still open. Unknown and already
    // evicted ids are reported in `skipped`; this never throws.
    ClearReport clear_kv(std::span<const CursorId> cursor_ids, int turn);

    std::size_t resident_tokens() const { return state_.resident; }
    std::size_t total_appended() const { return state_.total_appended; }
    std::span<const Message> messages() const { return state_.messages; }
    std::span<const CursorRecord> cursors() const { return state_.cursors; }
    const CursorRecord* find_cursor(CursorId id) const;

    LedgerView snapshot() const;

    const Tokenizer& tokenizer() const { return *tokenizer_; }
    std::shared_ptr<const Tokenizer> tokenizer_ptr() const { return tokenizer_; }

    // Rebuilds a ledger from recorded messages (for example a loaded trace),
    // checking ids, spans, cursor numbering and eviction marks.
    static ContextLedger from_messages(std::vector<Message> messages,
                                       std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());

private:
    std::shared_ptr<const Tokenizer> tokenizer_;
    LedgerState state_;
};

} // namespace sidequest
