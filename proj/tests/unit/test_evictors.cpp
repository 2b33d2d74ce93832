#include "doctest.h"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

#include "sidequest/evictors.hpp"
#include "sidequest/synthetic.hpp"

#include <random>
#include <set>

using namespace sidequest;
using sqtest::response;
using sqtest::words;

namespace {

PolicyOutput aux_out(const std::string& text) { return make_output(text, PolicyMode::aux, *default_tokenizer()); }

// user(20), then one cursor per turn with the given sizes.
ContextLedger cursors_ledger(const std::vector<std::size_t>& sizes) {
    ContextLedger l;
    l.append(Role::user, words(20), 0);
    for (std::size_t i = 0; i < sizes.size(); ++i)
        l.append(Role::tool_response, response(static_cast<CursorId>(i), sizes[i]), static_cast<int>(i),
                 static_cast<CursorId>(i));
    return l;
}

} // namespace

TEST_CASE("sidequest evictor") {
    CHECK(sidequest_evictor(aux_out("{del_cursors: [0]}")).command.cursor_ids == std::vector<CursorId>{0});
    CHECK(sidequest_evictor(aux_out("{del_cursors: [2, 0, 2]}")).command.cursor_ids == std::vector<CursorId>{0, 2});
    const auto bad = sidequest_evictor(aux_out("I would keep everything."));
    CHECK(bad.failed);
    CHECK(bad.command.empty());
    CHECK_FALSE(sidequest_evictor(aux_out("{del_cursors: []}")).failed);
}

TEST_CASE("budget under limit is a no-op") {
    const auto l = cursors_ledger({5000, 5000});
    BudgetPolicy p;
    p.budget = 16000;
    const auto d = budget_evict(l.snapshot(), p, 5);
    CHECK(d.command.empty());
    CHECK_FALSE(d.infeasible);
}

TEST_CASE("budget greedy selection by score") {
    // cursors of 500/800/300 tokens scored 0.9/0.1/0.5; resident 1620.
    const auto l = cursors_ledger({500, 800, 300});
    BudgetPolicy p;
    p.budget = 1000;
    p.sink_count = 1;
    p.recent_window = 0;
    const std::map<CursorId, double> scores{{0, 0.9}, {1, 0.1}, {2, 0.5}};
    const auto d = budget_evict(l.snapshot(), p, 10, [&](const CursorRecord& c) { return scores.at(c.id); });
    CHECK(d.command.cursor_ids == std::vector<CursorId>{1});
    CHECK_FALSE(d.infeasible);

    p.budget = 600;
    const auto two = budget_evict(l.snapshot(), p, 10, [&](const CursorRecord& c) { return scores.at(c.id); });
    CHECK(two.command.cursor_ids == std::vector<CursorId>{1, 2});
}

TEST_CASE("budget ties evict the older cursor") {
    const auto l = cursors_ledger({100, 100});
    BudgetPolicy p;
    p.budget = 150;
    p.recent_window = 0;
    const auto d = budget_evict(l.snapshot(), p, 10, [](const CursorRecord&) { return 0.5; });
    CHECK(d.command.cursor_ids == std::vector<CursorId>{0});
}

TEST_CASE("protected cursors and infeasibility") {
    const auto l = cursors_ledger({100, 100, 100});
    BudgetPolicy p;
    p.budget = 10;
    p.recent_window = 1;
    const auto d = budget_evict(l.snapshot(), p, 2);
    // cursors 1 and 2 opened within one turn of turn 2
    CHECK(d.command.cursor_ids == std::vector<CursorId>{0});
    CHECK(d.infeasible);

    ContextLedger s;
    s.append(Role::tool_response, response(0, 50), 0, 0);
    BudgetPolicy sink;
    sink.sink_count = 1;
    sink.recent_window = 0;
    CHECK(is_protected(s.snapshot(), s.cursors()[0], sink, 9));
    sink.sink_count = 0;
    CHECK_FALSE(is_protected(s.snapshot(), s.cursors()[0], sink, 9));
}

TEST_CASE("importance scores") {
    ContextLedger l;
    l.append(Role::user, words(3), 0);
    l.append(Role::tool_response, "[Cursor 0] open: a\nalpha beta gamma", 0, 0);
    l.append(Role::tool_response, "[Cursor 1] open: b\nalpha beta gamma", 1, 1);
    l.append(Role::assistant, "see [Cursor 1]", 2);
    l.append(Role::tool_response, "[Cursor 2] open: c\ndelta", 2, 2);
    const auto v = l.snapshot();
    CHECK(score_importance(v, 2, Scorer::recency, 2) == doctest::Approx(1.0));
    CHECK(score_importance(v, 1, Scorer::recency, 2) == doctest::Approx(0.5));
    CHECK(score_importance(v, 0, Scorer::recency, 0) == doctest::Approx(1.0));
    CHECK(score_importance(v, 0, Scorer::citation_frequency, 2) == doctest::Approx(0.0));
    // messages after cursor 1: the assistant note and cursor 2
    CHECK(score_importance(v, 1, Scorer::citation_frequency, 2) == doctest::Approx(0.5));
    // identical bodies: Jaccard 1
    CHECK(score_importance(v, 0, Scorer::redundancy, 2) == doctest::Approx(0.0));
    CHECK(score_importance(v, 1, Scorer::redundancy, 2) == doctest::Approx(0.0));
    CHECK(score_importance(v, 2, Scorer::redundancy, 2) == doctest::Approx(1.0));
}

TEST_CASE("randomized budget soundness") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        ContextLedger l;
        l.append(Role::user, words(1 + rng() % 40), 0);
        const int turns = 1 + static_cast<int>(rng() % 10);
        CursorId next = 0;
        for (int t = 0; t < turns; ++t) {
            if (rng() % 3) l.append(Role::assistant, words(rng() % 20), t);
            if (rng() % 4) {
                l.append(Role::tool_response, response(next, 4 + rng() % 300), t, next);
                ++next;
            }
            if (next > 0 && rng() % 5 == 0) {
                const std::vector<CursorId> ids{static_cast<CursorId>(rng() % next)};
                l.clear_kv(ids, t);
            }
        }
        BudgetPolicy p;
        p.budget = 1 + rng() % 2000;
        p.sink_count = rng() % 3;
        p.recent_window = static_cast<int>(rng() % 3);
        p.scorer = static_cast<Scorer>(rng() % 3);
        const auto v = l.snapshot();
        const auto d = budget_evict(v, p, turns);
        std::size_t evictable = 0;
        for (const auto& c : v.cursors())
            if (c.open() && !is_protected(v, c, p, turns)) evictable += c.span.len;
        const bool feasible = v.resident_tokens() - evictable <= p.budget;
        ContextLedger after = l;
        after.clear_kv(d.command.cursor_ids, turns);
        if (feasible) CHECK(after.resident_tokens() <= p.budget);
        CHECK(d.infeasible == (after.resident_tokens() > p.budget));
        for (CursorId id : d.command.cursor_ids) {
            const auto* c = v.find_cursor(id);
            REQUIRE(c);
            CHECK(c->open());
            CHECK_FALSE(is_protected(v, *c, p, turns));
        }
    }
}

TEST_CASE("oracle evictor on the walkthrough") {
    const auto w = walkthrough_workload();
    ScriptedPolicy p(w.tasks[0].main_script);
    CorpusTools tools(std::make_shared<const Corpus>(w.documents));
    const auto r = run(w.tasks[0].query, p, tools, RunConfig{});
    const auto& trace = r.trace;
    const auto full = ContextLedger::from_messages(trace.messages);
    // Before any last use has passed nothing is evictable.
    CHECK(oracle_evictor(full.snapshot(), trace, 1).empty());
    CHECK(oracle_evictor(full.snapshot(), trace, 2).cursor_ids == std::vector<CursorId>{0});
    CHECK(oracle_evictor(full.snapshot(), trace, 4).cursor_ids == std::vector<CursorId>{0, 1, 2});

    const auto last = sqtest::brute_last_use(trace);
    for (int t = 0; t <= 5; ++t) {
        std::vector<CursorId> expect;
        for (auto [c, l] : last)
            if (l < t) expect.push_back(c);
        CHECK(oracle_evictor(full.snapshot(), trace, t).cursor_ids == expect);
    }
}

TEST_CASE("strategy names") {
    CHECK(parse_strategy("none")->kind == StrategyKind::none);
    CHECK(parse_strategy("sidequest")->kind == StrategyKind::sidequest);
    CHECK(parse_strategy("oracle")->kind == StrategyKind::oracle);
    CHECK(parse_strategy("budget:citation")->scorer == Scorer::citation_frequency);
    CHECK(parse_strategy("budget:redundancy")->scorer == Scorer::redundancy);
    CHECK(parse_strategy("budget:recency")->name == "budget:recency");
    CHECK_FALSE(parse_strategy("budget:magic"));
    CHECK_FALSE(parse_strategy("h2o"));
}

TEST_CASE("scheduled evictor") {
    ScheduledEvictor s({{2, EvictionCommand{{3, 1, 3}}}});
    ContextLedger l;
    CHECK(s.at_loop_top(l.snapshot(), 1).empty());
    CHECK(s.at_loop_top(l.snapshot(), 2).cursor_ids == std::vector<CursorId>{1, 3});
}
