#include "sidequest/synthetic.hpp"

#include "sidequest/command.hpp"
#include "sidequest/error.hpp"
#include "sidequest/ledger.hpp"
#include "sidequest/policy.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

namespace sidequest {

namespace {

const char* const kWords[] = {
    "archive",  "report",  "season",   "harbor",  "museum",  "council", "treaty",  "river",   "engine",
    "festival", "journal", "province", "station", "library", "orbit",   "census",  "summit",  "canal",
    "garden",   "bridge",  "anthem",   "pioneer", "college", "ferry",   "glacier", "theater", "market",
    "castle",   "beacon",  "delta",    "valley",  "plateau", "signal",  "harvest", "voyage",  "atlas",
};

std::string words(std::mt19937_64& rng, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += kWords[rng() % std::size(kWords)];
    }
    return out;
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

std::string open_block(const std::string& doc_id) {
    ToolCall call;
    call.name = ToolName::open;
    call.doc_id = doc_id;
    return render_tool_block(call);
}

std::string search_block(const std::string& query) {
    ToolCall call;
    call.name = ToolName::search;
    call.query = query;
    return render_tool_block(call);
}

} // namespace

Workload walkthrough_workload() {
    Workload w;
    std::mt19937_64 rng(2026);
    w.documents = {
        {"gtc-2026", "GTC 2026 conference",
         "GTC 2026 dates: the conference runs Mar 16-19, 2026 in San Jose. " + words(rng, 520)},
        {"gtc-2025", "GTC 2025 recap", "GTC 2025 took place in March 2025. " + words(rng, 240)},
        {"gtc-news", "GTC news roundup", "Announcements ahead of GTC 2026 and partner sessions. " + words(rng, 200)},
        {"weekends-2026", "Long weekend calendar 2026",
         "Long weekend in March 2026: Friday Mar 20 to Sunday Mar 22 follows a regional holiday. " + words(rng, 380)},
        {"travel-tips", "Travel tips for March", "Plan a long weekend trip in spring. " + words(rng, 180)},
    };
    ScriptedTask t;
    t.task_id = "walkthrough";
    t.query = "When is GTC 2026, and when does the first long weekend after it start?";
    t.main_script = {
        "Thought: I need the dates of GTC 2026 first.\n" + search_block("GTC 2026 dates"),
        "Thought: the hit list in [Cursor 0] points at the official page gtc-2026. Open it.\n" +
            open_block("gtc-2026"),
        "Thought: [Cursor 1] says GTC 2026 runs Mar 16-19. Now look for a long weekend after that.\n" +
            search_block("long weekend March 2026"),
        "Thought: [Cursor 2] lists the long weekend starting Friday Mar 20.\n"
        "FINAL: Mar 20 (GTC 2026 runs Mar 16-19 per [Cursor 1]; the long weekend starts Mar 20 per [Cursor 2])",
    };
    t.aux_script = {
        "Only the user request is in context; nothing to remove. {del_cursors: []}",
        "The hit list in [Cursor 0] has served its purpose once the page is chosen. {del_cursors: [0]}",
        "[Cursor 1] holds the dates that must be cited. {del_cursors: []}",
        "[Cursor 1] and [Cursor 2] back the answer. {del_cursors: []}",
    };
    t.designed_last_use = {{0, 1}, {1, 3}, {2, 3}};
    w.tasks.push_back(std::move(t));
    return w;
}

Workload generate_workload(const WorkloadConfig& cfg) {
    if (cfg.min_turns < 2 || cfg.max_turns < cfg.min_turns) throw ConfigError("need 2 <= min_turns <= max_turns");
    if (cfg.min_output_tokens > cfg.max_output_tokens) throw ConfigError("min_output_tokens > max_output_tokens");
    std::mt19937_64 rng(cfg.seed);
    const auto tok = default_tokenizer();
    Workload w;

    for (std::size_t ti = 0; ti < cfg.tasks; ++ti) {
        int turns = 0;
        if (cfg.turns == TurnDistribution::uniform) {
            turns = static_cast<int>(uniform(rng, static_cast<std::size_t>(cfg.min_turns), static_cast<std::size_t>(cfg.max_turns)));
        } else {
            // Box-Muller over raw engine bits keeps this independent of the
            // standard library's distribution algorithms.
            const double u1 = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
            const double u2 = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
            const double x = cfg.lognormal_median * std::exp(cfg.lognormal_sigma * z);
            turns = std::clamp(static_cast<int>(std::lround(x)), cfg.min_turns, cfg.max_turns);
        }
        const int final_turn = turns - 1;

        ScriptedTask task;
        task.task_id = "task-" + std::to_string(ti);
        task.query = "Question " + std::to_string(ti) + ": " + words(rng, 12) + "?";

        std::vector<int> last_use(static_cast<std::size_t>(final_turn));
        for (int c = 0; c < final_turn; ++c) {
            const int gap = static_cast<int>(uniform(rng, 0, static_cast<std::size_t>(cfg.max_reuse_gap)));
            last_use[static_cast<std::size_t>(c)] = std::min(c + gap, final_turn);
            task.designed_last_use[c] = last_use[static_cast<std::size_t>(c)];
        }

        for (int t = 0; t <= final_turn; ++t) {
            std::string thought = "Thought: " + words(rng, uniform(rng, cfg.min_thought_tokens, cfg.max_thought_tokens));
            std::vector<int> cites;
            for (int c = 0; c < t; ++c)
                if (last_use[static_cast<std::size_t>(c)] >= t) cites.push_back(c);
            if (!cites.empty()) {
                thought += " using";
                for (int c : cites) thought += " " + cursor_tag(c);
            }
            if (t == final_turn) {
                std::string answer = "FINAL: " + words(rng, 6);
                for (int c : cites) answer += " " + cursor_tag(c);
                task.main_script.push_back(thought + "\n" + answer);
                break;
            }
            // Cursor t opens document <task>-d<t>. Size the body so the
            // rendered output hits the drawn total exactly.
            const std::string doc_id = task.task_id + "-d" + std::to_string(t);
            const std::string title = "Source " + std::to_string(t) + " " + words(rng, 2);
            const std::size_t target = uniform(rng, cfg.min_output_tokens, cfg.max_output_tokens);
            const std::string header = cursor_tag(t) + " open: " + doc_id + " (chunk 1/1) | " + title + "\n";
            const std::size_t header_tokens = tok->count(header);
            const std::size_t body_tokens = target > header_tokens ? target - header_tokens : 1;
            w.documents.push_back({doc_id, title, words(rng, body_tokens)});
            task.main_script.push_back(thought + "\n" + open_block(doc_id));
        }
        w.tasks.push_back(std::move(task));
    }
    return w;
}

std::vector<std::string> hindsight_aux_script(const ScriptedTask& task, int interval, int latency) {
    std::vector<std::string> out;
    std::set<int> deleted;
    const int turns = static_cast<int>(task.main_script.size());
    for (int s = 0; s < turns; s += interval) {
        EvictionCommand cmd;
        for (const auto& [c, last] : task.designed_last_use) {
            if (c < s && last < s + latency && deleted.insert(c).second) cmd.cursor_ids.push_back(c);
        }
        out.push_back("Reviewing open cursors. " + render_command(cmd, CommandStyle::relaxed));
    }
    return out;
}

void write_corpus_jsonl(std::ostream& out, const std::vector<Document>& docs) {
    for (const auto& d : docs) {
        nlohmann::ordered_json j;
        j["doc_id"] = d.doc_id;
        j["title"] = d.title;
        j["body"] = d.body;
        out << j.dump() << '\n';
    }
}

void write_tasks_jsonl(std::ostream& out, const std::vector<ScriptedTask>& tasks) {
    for (const auto& t : tasks) {
        nlohmann::ordered_json j;
        j["task_id"] = t.task_id;
        j["query"] = t.query;
        j["main_script"] = t.main_script;
        j["aux_script"] = t.aux_script;
        out << j.dump() << '\n';
    }
}

std::vector<ScriptedTask> read_tasks_jsonl(std::istream& in) {
    std::vector<ScriptedTask> tasks;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ScriptedTask t;
            t.task_id = j.value("task_id", "task-" + std::to_string(tasks.size()));
            t.query = j.at("query").get<std::string>();
            if (j.contains("main_script")) t.main_script = j["main_script"].get<std::vector<std::string>>();
            if (j.contains("aux_script")) t.aux_script = j["aux_script"].get<std::vector<std::string>>();
            tasks.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("tasks line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return tasks;
}

std::vector<ScriptedTask> read_tasks_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open tasks file " + path);
    return read_tasks_jsonl(in);
}

} // namespace sidequest
