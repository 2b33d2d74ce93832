#include "sidequest/trace.hpp"

#include "sidequest/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sidequest {

using ordered_json = nlohmann::ordered_json;

int Trace::final_turn() const {
    int t = 0;
    for (const auto& m : messages) t = std::max(t, m.turn);
    return t;
}

std::size_t Trace::cursor_count() const {
    return static_cast<std::size_t>(
        std::count_if(messages.begin(), messages.end(), [](const Message& m) { return m.cursor_id.has_value(); }));
}

std::vector<CursorId> cited_cursors(std::string_view text) {
    static constexpr std::string_view prefix = "[Cursor ";
    std::vector<CursorId> ids;
    std::size_t pos = 0;
    while ((pos = text.find(prefix, pos)) != std::string_view::npos) {
        std::size_t i = pos + prefix.size();
        long value = 0;
        std::size_t digits = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9' && digits < 9) {
            value = value * 10 + (text[i] - '0');
            ++i;
            ++digits;
        }
        if (digits > 0 && i < text.size() && text[i] == ']') ids.push_back(static_cast<CursorId>(value));
        pos += prefix.size();
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

Trace make_trace(std::string trace_id, std::string task, const ContextLedger& ledger, std::string outcome) {
    Trace t;
    t.trace_id = std::move(trace_id);
    t.task = std::move(task);
    t.messages.assign(ledger.messages().begin(), ledger.messages().end());
    t.outcome = std::move(outcome);
    for (auto it = t.messages.rbegin(); it != t.messages.rend(); ++it) {
        if (it->role == Role::final_answer) {
            t.final_citations = cited_cursors(it->text);
            break;
        }
    }
    return t;
}

namespace {

ordered_json optional_int(const std::optional<int>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json header_json(const Trace& t) {
    ordered_json h;
    h["trace_id"] = t.trace_id;
    h["task"] = t.task;
    h["correct"] = t.correct ? ordered_json(*t.correct) : ordered_json(nullptr);
    h["final_citations"] = t.final_citations;
    h["outcome"] = t.outcome;
    ordered_json discarded = ordered_json::array();
    for (const auto& d : t.discarded) discarded.push_back({{"turn", d.turn}, {"text", d.text}});
    h["discarded"] = std::move(discarded);
    return h;
}

ordered_json message_json(const Message& m) {
    ordered_json j;
    j["id"] = m.id;
    j["role"] = std::string(to_string(m.role));
    j["text"] = m.text;
    j["turn"] = m.turn;
    j["cursor_id"] = optional_int(m.cursor_id);
    j["span_start"] = m.span.start;
    j["span_len"] = m.span.len;
    j["evicted_at_turn"] = optional_int(m.evicted_at_turn);
    return j;
}

std::optional<int> read_optional_int(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<int>();
}

Message message_from_json(const ordered_json& j) {
    Message m;
    m.id = j.at("id").get<std::uint64_t>();
    const auto role = parse_role(j.at("role").get<std::string>());
    if (!role) throw FormatError("unknown role '" + j.at("role").get<std::string>() + "'");
    m.role = *role;
    m.text = j.at("text").get<std::string>();
    m.turn = j.at("turn").get<int>();
    m.cursor_id = read_optional_int(j, "cursor_id");
    m.span.start = j.at("span_start").get<std::size_t>();
    m.span.len = j.at("span_len").get<std::size_t>();
    m.evicted_at_turn = read_optional_int(j, "evicted_at_turn");
    return m;
}

void header_from_json(const ordered_json& j, Trace& t) {
    t.trace_id = j.at("trace_id").get<std::string>();
    t.task = j.value("task", std::string{});
    if (j.contains("correct") && !j["correct"].is_null()) t.correct = j["correct"].get<bool>();
    if (j.contains("final_citations")) t.final_citations = j["final_citations"].get<std::vector<CursorId>>();
    t.outcome = j.value("outcome", std::string{});
    if (j.contains("discarded")) {
        for (const auto& d : j["discarded"]) t.discarded.push_back({d.at("turn").get<int>(), d.at("text").get<std::string>()});
    }
}

} // namespace

void write_trace(std::ostream& out, const Trace& trace) {
    out << header_json(trace).dump() << '\n';
    for (const auto& m : trace.messages) out << message_json(m).dump() << '\n';
}

std::string trace_to_jsonl(const Trace& trace) {
    std::ostringstream os;
    write_trace(os, trace);
    return os.str();
}

std::vector<Trace> read_traces(std::istream& in) {
    std::vector<Trace> traces;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("trace line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            if (j.contains("trace_id") && !j.contains("role")) {
                traces.emplace_back();
                header_from_json(j, traces.back());
                continue;
            }
            if (traces.empty()) {
                traces.emplace_back();
                traces.back().trace_id = "trace-0";
            }
            traces.back().messages.push_back(message_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("trace line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return traces;
}

std::vector<Trace> read_traces_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open trace file " + path);
    return read_traces(in);
}

void write_traces_file(const std::string& path, const std::vector<Trace>& traces) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write trace file " + path);
    for (const auto& t : traces) write_trace(out, t);
}

std::map<std::string, bool> read_verdicts(std::istream& in) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    std::map<std::string, bool> verdicts;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return verdicts;
    try {
        auto whole = nlohmann::json::parse(text, nullptr, false);
        if (!whole.is_discarded() && whole.is_object() && !whole.contains("trace_id")) {
            for (const auto& [k, v] : whole.items()) verdicts[k] = v.get<bool>();
            return verdicts;
        }
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto j = nlohmann::json::parse(line);
            verdicts[j.at("trace_id").get<std::string>()] = j.at("correct").get<bool>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("verdicts: ") + e.what());
    }
    return verdicts;
}

std::map<std::string, bool> read_verdicts_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open verdicts file " + path);
    return read_verdicts(in);
}

} // namespace sidequest
