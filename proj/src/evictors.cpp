#include "sidequest/evictors.hpp"

#include "sidequest/hindsight.hpp"

#include <algorithm>
#include <set>

namespace sidequest {

SidequestDecision sidequest_evictor(const PolicyOutput& aux_output) {
    if (const auto* cmd = std::get_if<EvictionCommand>(&aux_output.parsed)) return {cmd->normalized(), false};
    return {{}, true};
}

std::string_view to_string(Scorer scorer) {
    switch (scorer) {
    case Scorer::recency: return "recency";
    case Scorer::citation_frequency: return "citation";
    case Scorer::redundancy: return "redundancy";
    }
    return "recency";
}

std::optional<Scorer> parse_scorer(std::string_view name) {
    if (name == "recency") return Scorer::recency;
    if (name == "citation" || name == "citation_frequency") return Scorer::citation_frequency;
    if (name == "redundancy") return Scorer::redundancy;
    return std::nullopt;
}

namespace {

// Response text without its "[Cursor i] ..." header line.
std::string_view cursor_body(const LedgerView& view, const CursorRecord& c) {
    std::string_view text = view.messages()[c.response_index].text;
    const std::string tag = cursor_tag(c.id);
    if (text.substr(0, tag.size()) == tag) {
        const auto nl = text.find('\n');
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    }
    return text;
}

std::set<std::string> token_set(std::string_view text) {
    std::set<std::string> out;
    for (const auto& p : default_tokenizer()->split(text)) out.emplace(text.substr(p.offset, p.length));
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace

double score_importance(const LedgerView& view, CursorId cursor, Scorer scorer, int current_turn) {
    const CursorRecord* c = view.find_cursor(cursor);
    if (!c) return 0.0;
    switch (scorer) {
    case Scorer::recency:
        if (current_turn <= 0) return 1.0;
        return std::min(1.0, static_cast<double>(c->opened_turn) / static_cast<double>(current_turn));
    case Scorer::citation_frequency: {
        const auto msgs = view.messages();
        const std::string tag = cursor_tag(cursor);
        std::size_t later = 0, cited = 0;
        for (std::size_t i = c->response_index + 1; i < msgs.size(); ++i) {
            ++later;
            if (msgs[i].text.find(tag) != std::string::npos) ++cited;
        }
        return later == 0 ? 0.0 : static_cast<double>(cited) / static_cast<double>(later);
    }
    case Scorer::redundancy: {
        const auto mine = token_set(cursor_body(view, *c));
        double worst = 0.0;
        for (const auto& other : view.cursors()) {
            if (other.id == cursor || !other.open()) continue;
            worst = std::max(worst, jaccard(mine, token_set(cursor_body(view, other))));
        }
        return 1.0 - worst;
    }
    }
    return 0.0;
}

bool is_protected(const LedgerView&, const CursorRecord& c, const BudgetPolicy& policy, int current_turn) {
    const std::size_t first = c.call_index.value_or(c.response_index);
    if (first < policy.sink_count) return true;
    return c.opened_turn >= current_turn - policy.recent_window;
}

BudgetDecision budget_evict(const LedgerView& view, const BudgetPolicy& policy, int current_turn, const ScoreFn& score) {
    BudgetDecision d;
    std::size_t resident = view.resident_tokens();
    if (resident <= policy.budget) return d;

    struct Candidate {
        double score;
        const CursorRecord* cursor;
    };
    std::vector<Candidate> candidates;
    for (const auto& c : view.cursors()) {
        if (c.open() && !is_protected(view, c, policy, current_turn)) candidates.push_back({score(c), &c});
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.cursor->opened_turn != b.cursor->opened_turn) return a.cursor->opened_turn < b.cursor->opened_turn;
        return a.cursor->id < b.cursor->id;
    });
    for (const auto& cand : candidates) {
        if (resident <= policy.budget) break;
        d.command.cursor_ids.push_back(cand.cursor->id);
        resident -= cand.cursor->span.len;
    }
    d.infeasible = resident > policy.budget;
    d.command = d.command.normalized();
    return d;
}

BudgetDecision budget_evict(const LedgerView& view, const BudgetPolicy& policy, int current_turn) {
    return budget_evict(view, policy, current_turn, [&](const CursorRecord& c) {
        return score_importance(view, c.id, policy.scorer, current_turn);
    });
}

EvictionCommand oracle_evictor(const LedgerView& so_far, const Trace& full_trace, int current_turn) {
    const auto last = last_use_indices(full_trace);
    EvictionCommand cmd;
    for (const auto& c : so_far.cursors()) {
        if (!c.open()) continue;
        const auto it = last.find(c.id);
        if (it != last.end() && it->second < current_turn) cmd.cursor_ids.push_back(c.id);
    }
    return cmd;
}

EvictionCommand BudgetEvictor::at_loop_top(const LedgerView& view, int turn) {
    auto d = budget_evict(view, policy_, turn);
    if (d.infeasible) ++infeasible_turns_;
    return d.command;
}

OracleEvictor::OracleEvictor(Trace reference) : reference_(std::move(reference)), last_use_(last_use_indices(reference_)) {}

EvictionCommand OracleEvictor::at_loop_top(const LedgerView& view, int turn) {
    EvictionCommand cmd;
    for (const auto& c : view.cursors()) {
        if (!c.open()) continue;
        const auto it = last_use_.find(c.id);
        if (it != last_use_.end() && it->second < turn) cmd.cursor_ids.push_back(c.id);
    }
    return cmd;
}

EvictionCommand ScheduledEvictor::at_loop_top(const LedgerView&, int turn) {
    const auto it = schedule_.find(turn);
    return it == schedule_.end() ? EvictionCommand{} : it->second.normalized();
}

std::optional<StrategySpec> parse_strategy(std::string_view name) {
    StrategySpec s;
    s.name = std::string(name);
    if (name == "none") return s;
    if (name == "sidequest") {
        s.kind = StrategyKind::sidequest;
        return s;
    }
    if (name == "oracle") {
        s.kind = StrategyKind::oracle;
        return s;
    }
    if (name.substr(0, 7) == "budget:") {
        const auto scorer = parse_scorer(name.substr(7));
        if (!scorer) return std::nullopt;
        s.kind = StrategyKind::budget;
        s.scorer = *scorer;
        return s;
    }
    return std::nullopt;
}

} // namespace sidequest
