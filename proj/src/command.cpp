#include "sidequest/command.hpp"

#include <algorithm>

namespace sidequest {

EvictionCommand EvictionCommand::normalized() const {
    EvictionCommand out{cursor_ids};
    std::sort(out.cursor_ids.begin(), out.cursor_ids.end());
    out.cursor_ids.erase(std::unique(out.cursor_ids.begin(), out.cursor_ids.end()), out.cursor_ids.end());
    return out;
}

std::string render_command(const EvictionCommand& cmd, CommandStyle style) {
    std::string out = style == CommandStyle::strict_json ? "{\"del_cursors\": [" : "{del_cursors: [";
    for (std::size_t i = 0; i < cmd.cursor_ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(cmd.cursor_ids[i]);
    }
    return out + "]}";
}

} // namespace sidequest
