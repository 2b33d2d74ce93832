#pragma once

#include "sidequest/ledger.hpp"

#include <string>
#include <vector>

namespace sidequest {

// Cursor ids an evictor wants removed. Produced by the auxiliary thread
// ({del_cursors: [...]}) or by a heuristic strategy.
struct EvictionCommand {
    std::vector<CursorId> cursor_ids;

    bool empty() const { return cursor_ids.empty(); }
    // Sorted ascending, duplicates removed.
    EvictionCommand normalized() const;
    friend bool operator==(const EvictionCommand&, const EvictionCommand&) = default;
};

enum class CommandStyle { strict_json, relaxed };

// strict:  {"del_cursors": [0, 2]}
// relaxed: {del_cursors: [0, 2]}
std::string render_command(const EvictionCommand& cmd, CommandStyle style = CommandStyle::strict_json);

} // namespace sidequest
