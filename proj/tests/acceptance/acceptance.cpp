// Acceptance suite: one PASS/FAIL line per criterion.
#include "support/helpers.hpp"
#include "support/oracles.hpp"
#include "support/traces.hpp"

#include "sidequest/command.hpp"
#include "sidequest/evictors.hpp"
#include "sidequest/experiment.hpp"
#include "sidequest/hindsight.hpp"
#include "sidequest/runtime.hpp"
#include "sidequest/synthetic.hpp"

#include "httplib.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

using namespace sidequest;
using sqtest::response;
using sqtest::words;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "AC" << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << name;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

class FixedTools final : public ToolBackend {
public:
    explicit FixedTools(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {}
    ToolOutput execute(const ToolCall&) override {
        const CursorId id = next_++;
        const std::size_t n = static_cast<std::size_t>(id) < sizes_.size() ? sizes_[id] : 10;
        return {id, response(id, n)};
    }
    void reset() override { next_ = 0; }

private:
    std::vector<std::size_t> sizes_;
    CursorId next_ = 0;
};

std::string search_step(const std::string& thought, const std::string& q) {
    return thought + "\n```tool {\"name\": \"search\", \"args\": {\"query\": \"" + q + "\"}}```";
}

// --- AC1 ---------------------------------------------------------------------

Outcome ledger_conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    std::size_t checks = 0;
    for (int seq = 0; seq < 10000; ++seq) {
        ContextLedger l;
        std::size_t appended = 0, evicted = 0;
        CursorId next = 0;
        int turn = 0;
        const int steps = 10 + static_cast<int>(rng() % 30);
        for (int s = 0; s < steps; ++s) {
            switch (rng() % 4) {
            case 0: {
                const std::size_t n = rng() % 40;
                l.append(Role::assistant, words(n), turn);
                appended += n;
                break;
            }
            case 1: {
                const std::size_t n = 4 + rng() % 200;
                l.append(Role::tool_response, response(next, n), turn, next);
                ++next;
                appended += n;
                break;
            }
            case 2: {
                std::vector<CursorId> ids;
                for (int k = static_cast<int>(rng() % 3); k > 0; --k) ids.push_back(static_cast<CursorId>(rng() % (next + 2)));
                evicted += l.clear_kv(ids, turn).freed;
                break;
            }
            default: ++turn;
            }
            ++checks;
            if (l.total_appended() != appended || l.resident_tokens() + evicted != l.total_appended()) {
                return {false, "mismatch in sequence " + std::to_string(seq)};
            }
        }
    }
    const double secs = seconds_since(t0);
    return {secs < 5.0, std::to_string(checks) + " steps over 10000 sequences in " + fmt(secs) + " s"};
}

// --- AC2 ---------------------------------------------------------------------

Outcome zero_overhead() {
    WorkloadConfig wc;
    wc.seed = 202;
    wc.tasks = 49;
    auto w = generate_workload(wc);
    auto walk = walkthrough_workload();
    const auto corpus = std::make_shared<const Corpus>(w.documents);
    const auto walk_corpus = std::make_shared<const Corpus>(walk.documents);
    std::size_t runs = 0, evictions = 0;
    for (std::size_t i = 0; i < w.tasks.size() + 1; ++i) {
        const bool is_walk = i == w.tasks.size();
        ScriptedTask task = is_walk ? walk.tasks[0] : w.tasks[i];
        const int k = is_walk ? 1 : 1 + static_cast<int>(i % 4);
        if (!is_walk) task.aux_script = hindsight_aux_script(task, k);
        RunConfig cfg;
        cfg.trigger_interval = k;
        cfg.aux_enabled = true;
        ScriptedPolicy with_aux(task.main_script, task.aux_script);
        CorpusTools tools_a(is_walk ? walk_corpus : corpus);
        const auto a = run(task.query, with_aux, tools_a, cfg);

        std::map<int, EvictionCommand> schedule;
        for (const auto& e : a.eviction_log) schedule[e.turn].cursor_ids = e.cursor_ids;
        evictions += a.eviction_log.size();
        ScheduledEvictor replay(schedule);
        cfg.aux_enabled = false;
        ScriptedPolicy without(task.main_script);
        CorpusTools tools_b(is_walk ? walk_corpus : corpus);
        Runtime rt(without, tools_b, cfg, &replay);
        const auto b = rt.run(task.query);
        std::size_t ta = 0, tb = 0;
        for (const auto& m : a.trace.messages) ta += m.span.len;
        for (const auto& m : b.trace.messages) tb += m.span.len;
        if (ta != tb || a.trace.messages != b.trace.messages || a.metrics.kv_reads_main != b.metrics.kv_reads_main) {
            return {false, "task " + task.task_id + " differs"};
        }
        ++runs;
    }
    return {runs == 50 && evictions > 0,
            std::to_string(runs) + " runs, " + std::to_string(evictions) + " aux evictions replayed, totals bit-equal"};
}

// --- AC3 ---------------------------------------------------------------------

Outcome walkthrough_golden() {
    const auto w = walkthrough_workload();
    const auto corpus = std::make_shared<const Corpus>(w.documents);
    const auto& task = w.tasks[0];
    RunConfig cfg;
    cfg.trigger_interval = 1;
    cfg.aux_latency_turns = 1;
    ScriptedPolicy base_p(task.main_script);
    CorpusTools base_t(corpus);
    const auto base = run(task.query, base_p, base_t, cfg);
    cfg.aux_enabled = true;
    ScriptedPolicy p(task.main_script, task.aux_script);
    CorpusTools t(corpus);
    const auto r = run(task.query, p, t, cfg);

    std::size_t c0 = 0;
    for (const auto& m : base.trace.messages) {
        if (m.turn == 0 && (m.role == Role::tool_call || m.role == Role::tool_response)) c0 += m.span.len;
    }
    if (r.eviction_log.size() != 1) return {false, "eviction_log has " + std::to_string(r.eviction_log.size()) + " entries"};
    const auto& e = r.eviction_log[0];
    const bool log_ok = e.turn == 2 && e.spawn_turn == 1 && e.turn >= *e.spawn_turn + 1 &&
                        e.cursor_ids == std::vector<CursorId>{0} && e.freed == c0 && e.skipped.empty();

    using K = EventKind;
    const std::vector<std::pair<int, K>> expected = {
        {0, K::aux_spawn},   {0, K::main_output}, {0, K::tool_output}, {1, K::aux_applied}, {1, K::aux_spawn},
        {1, K::main_output}, {1, K::tool_output}, {2, K::aux_applied}, {2, K::aux_spawn},   {2, K::main_output},
        {2, K::tool_output}, {3, K::aux_applied}, {3, K::aux_spawn},   {3, K::main_output}, {3, K::final_answer},
        {3, K::stop},
    };
    std::vector<std::pair<int, K>> got;
    for (const auto& ev : r.events) got.emplace_back(ev.turn, ev.kind);
    // eviction visible only from turn 2 on
    bool loop_top_only = true;
    for (const auto& m : r.trace.messages)
        if (m.evicted_at_turn && *m.evicted_at_turn != 2) loop_top_only = false;

    const bool ok = log_ok && got == expected && loop_top_only && r.metrics.peak_resident < base.metrics.peak_resident &&
                    r.final_answer.has_value();
    return {ok, "eviction_log [(turn 2, [0], " + std::to_string(e.freed) + " tokens, spawned turn 1)], peak " +
                    std::to_string(r.metrics.peak_resident) + " vs " + std::to_string(base.metrics.peak_resident) +
                    ", " + std::to_string(got.size()) + " events in order"};
}

// --- AC4 ---------------------------------------------------------------------

// Oracle peak for one task, derived from the generator's output sizes and
// designed last uses without running the loop.
std::pair<std::uint64_t, std::uint64_t> analytic_peaks(const Workload& w, const ScriptedTask& task) {
    const auto& tok = *default_tokenizer();
    struct Item {
        int turn;
        std::uint64_t len;
        std::optional<CursorId> cursor;
    };
    std::vector<Item> items{{0, tok.count(task.query), std::nullopt}};
    CursorId next = 0;
    for (std::size_t t = 0; t < task.main_script.size(); ++t) {
        const auto p = parse_output(task.main_script[t], PolicyMode::main);
        const int turn = static_cast<int>(t);
        if (std::holds_alternative<FinalAnswerParse>(p)) {
            items.push_back({turn, tok.count(task.main_script[t]), std::nullopt});
            continue;
        }
        const auto& c = std::get<ToolCallParse>(p);
        const Document* d = nullptr;
        for (const auto& doc : w.documents)
            if (doc.doc_id == c.call.doc_id) d = &doc;
        const std::string header = cursor_tag(next) + " open: " + d->doc_id + " (chunk 1/1) | " + d->title;
        items.push_back({turn, tok.count(c.thought), std::nullopt});
        items.push_back({turn, tok.count(c.block) + tok.count(header) + tok.count(d->body), next});
        ++next;
    }
    std::uint64_t base = 0, oracle = 0;
    for (std::size_t k = 0; k < items.size(); ++k) {
        std::uint64_t all = 0, kept = 0;
        for (std::size_t j = 0; j <= k; ++j) {
            all += items[j].len;
            if (!items[j].cursor || task.designed_last_use.at(*items[j].cursor) >= items[k].turn) kept += items[j].len;
        }
        base = std::max(base, all);
        oracle = std::max(oracle, kept);
    }
    return {base, oracle};
}

Outcome synthetic_savings() {
    const auto t0 = std::chrono::steady_clock::now();
    WorkloadConfig wc;  // 20 tasks, 8-16 turns, 400-800 token outputs, reuse within 2 turns
    const auto w = generate_workload(wc);
    ExperimentSpec spec;
    spec.strategies = {"none", "oracle"};
    const auto r = run_experiment(w.tasks, std::make_shared<const Corpus>(w.documents), spec);

    double sum_base = 0, sum_oracle = 0;
    for (std::size_t i = 0; i < w.tasks.size(); ++i) {
        const auto [base, oracle] = analytic_peaks(w, w.tasks[i]);
        if (r.rows[2 * i].metrics.peak_resident != base || r.rows[2 * i + 1].metrics.peak_resident != oracle) {
            return {false, w.tasks[i].task_id + ": measured peaks differ from the precomputed ones"};
        }
        sum_base += static_cast<double>(base);
        sum_oracle += static_cast<double>(oracle);
    }
    const double precomputed = (sum_base - sum_oracle) / sum_base * 100.0;
    const double measured = *r.summary[1].peak_reduction_pct;
    const double secs = seconds_since(t0);
    const bool ok = measured == precomputed && measured >= 50.0 && secs < 30.0;
    return {ok, "mean peak reduction " + fmt(measured) + "% (precomputed " + fmt(precomputed) + "%, threshold 50%), " +
                    fmt(secs) + " s"};
}

// --- AC5 ---------------------------------------------------------------------

Outcome kv_read_accounting() {
    std::mt19937_64 rng(5005);
    const auto& tok = *default_tokenizer();
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    std::map<std::string, int> outcomes;
    for (int runi = 0; runi < 1000; ++runi) {
        const int steps = 1 + pick(18);
        std::vector<std::string> main;
        for (int s = 0; s < steps; ++s) {
            const int kind = pick(20);
            if (kind == 0) main.push_back("no tool call here " + words(pick(6)));
            else main.push_back(search_step(words(pick(12), 't'), "q" + std::to_string(s)));
        }
        if (pick(4)) main.push_back("FINAL: " + words(1 + pick(8)));
        for (int s = 0; s < 3; ++s) main.push_back("FINAL: spare");
        std::vector<std::size_t> sizes;
        for (int s = 0; s < 40; ++s) sizes.push_back(4 + static_cast<std::size_t>(pick(400)));
        std::vector<std::string> aux_texts;
        std::vector<std::optional<std::vector<CursorId>>> aux_cmds;
        for (int s = 0; s < 40; ++s) {
            if (pick(8) == 0) {
                aux_texts.push_back("cannot decide " + words(pick(5)));
                aux_cmds.push_back(std::nullopt);
                continue;
            }
            EvictionCommand c;
            for (int k = pick(4); k > 0; --k) c.cursor_ids.push_back(pick(12));
            aux_texts.push_back(words(pick(20), 'a') + " " +
                                render_command(c, pick(2) ? CommandStyle::relaxed : CommandStyle::strict_json));
            aux_cmds.push_back(c.cursor_ids);
        }

        RunConfig cfg;
        cfg.trigger_interval = 1 + pick(5);
        cfg.aux_latency_turns = 1 + pick(4);
        cfg.aux_enabled = pick(5) != 0;
        cfg.aux_accounting = pick(2) ? AuxAccounting::naive : AuxAccounting::shared_prefix;
        cfg.max_turns = 2 + pick(20);
        cfg.max_resident = pick(6) == 0 ? 200 + static_cast<std::size_t>(pick(2000)) : 1000000;
        ScriptedPolicy policy(main, aux_texts);
        FixedTools tools(sizes);
        const auto r = run("query " + words(1 + pick(10)), policy, tools, cfg);
        ++outcomes[std::string(to_string(r.metrics.outcome.kind))];
        const auto& ms = r.trace.messages;

        // Replay the loop schedule to get the expected eviction marks and
        // aux thread sizes.
        int last_turn = 0;
        for (const auto& m : ms) last_turn = std::max(last_turn, m.turn);
        std::vector<std::optional<int>> evicted_at(ms.size());
        std::map<CursorId, std::vector<std::size_t>> cursor_msgs;
        for (std::size_t i = 0; i < ms.size(); ++i) {
            if (ms[i].role != Role::tool_response) continue;
            cursor_msgs[*ms[i].cursor_id].push_back(i);
            if (i > 0 && ms[i - 1].role == Role::tool_call && ms[i - 1].turn == ms[i].turn)
                cursor_msgs[*ms[i].cursor_id].push_back(i - 1);
        }
        auto resident_at_top = [&](int t) {
            std::uint64_t res = 0;
            for (std::size_t i = 0; i < ms.size(); ++i)
                if ((ms[i].turn < t || ms[i].role == Role::user) && !(evicted_at[i] && *evicted_at[i] <= t))
                    res += ms[i].span.len;
            return res;
        };
        struct Thread {
            int spawn;
            std::size_t index;
            std::uint64_t shared;
            CursorId visible;
        };
        std::optional<Thread> pending;
        std::size_t spawned = 0;
        std::uint64_t naive = 0, shared_prefix = 0, aux_decode = 0;
        const std::uint64_t trig = tok.count(cfg.trigger_phrase);
        auto meter = [&](const Thread& th) {
            const std::uint64_t gen = tok.count(aux_texts[th.index]);
            for (std::uint64_t i = 0; i < gen; ++i) {
                naive += th.shared + trig + i;
                shared_prefix += trig + i + (i == 0 ? th.shared : 0);
            }
            aux_decode += gen;
        };
        std::vector<int> spawn_turns;
        for (int t = 0; t <= last_turn; ++t) {
            if (pending && t >= pending->spawn + cfg.aux_latency_turns) {
                meter(*pending);
                if (const auto& cmd = aux_cmds[pending->index]) {
                    for (CursorId c : *cmd) {
                        if (c >= pending->visible || !cursor_msgs.count(c)) continue;
                        for (std::size_t i : cursor_msgs[c])
                            if (!evicted_at[i]) evicted_at[i] = t;
                    }
                }
                pending.reset();
            }
            if (cfg.aux_enabled && !pending && t % cfg.trigger_interval == 0) {
                CursorId visible = 0;
                for (const auto& m : ms)
                    if (m.role == Role::tool_response && m.turn < t) ++visible;
                pending = Thread{t, spawned++, resident_at_top(t), visible};
                spawn_turns.push_back(t);
            }
        }
        if (pending) meter(*pending);

        for (std::size_t i = 0; i < ms.size(); ++i) {
            if (ms[i].evicted_at_turn != evicted_at[i]) return {false, "run " + std::to_string(runi) + ": eviction marks differ"};
        }
        std::vector<int> got_spawns;
        for (const auto& a : r.aux_threads) got_spawns.push_back(a.spawn_turn);
        if (got_spawns != spawn_turns) return {false, "run " + std::to_string(runi) + ": spawn turns differ"};

        const auto o = sqtest::main_oracle(r.trace);
        const auto& m = r.metrics;
        const std::uint64_t aux_cfg = cfg.aux_accounting == AuxAccounting::naive ? naive : shared_prefix;
        if (m.kv_reads_main != o.kv_reads_main || m.decode_tokens_main != o.decode_main || m.peak_resident != o.peak ||
            m.kv_reads_aux_naive != naive || m.kv_reads_aux_shared_prefix != shared_prefix || m.kv_reads_aux != aux_cfg ||
            m.decode_tokens_aux != aux_decode) {
            std::ostringstream os;
            os << "run " << runi << ": metrics differ from the replay oracle; main " << m.kv_reads_main << "/"
               << o.kv_reads_main << " decode " << m.decode_tokens_main << "/" << o.decode_main << " peak "
               << m.peak_resident << "/" << o.peak << " naive " << m.kv_reads_aux_naive << "/" << naive << " shared "
               << m.kv_reads_aux_shared_prefix << "/" << shared_prefix << " aux decode " << m.decode_tokens_aux << "/"
               << aux_decode << " outcome " << to_string(m.outcome.kind);
            return {false, os.str()};
        }
    }
    std::string hist;
    for (const auto& [k, v] : outcomes) hist += (hist.empty() ? "" : ", ") + k + "=" + std::to_string(v);
    return {true, "1000 runs exact; outcomes " + hist};
}

// --- AC6 ---------------------------------------------------------------------

Outcome hindsight_equivalence() {
    std::mt19937_64 rng(6006);
    std::size_t cursors = 0, sets = 0;
    for (int i = 0; i < 500; ++i) {
        const auto tr = sqtest::random_trace(rng, "h" + std::to_string(i), 20);
        const auto brute = sqtest::brute_last_use(tr);
        if (last_use_indices(tr) != brute) return {false, "last use differs on trace " + std::to_string(i)};
        for (auto [c, l] : brute) {
            if (last_use_index(tr, c) != l) return {false, "last_use_index differs"};
            ++cursors;
        }
        for (int t = 0; t <= tr.final_turn() + 1; ++t) {
            std::vector<CursorId> expect;
            for (auto [c, l] : brute)
                if (l < t) expect.push_back(c);
            if (expired_at(tr, t) != expect) return {false, "expired_at differs on trace " + std::to_string(i)};
            ++sets;
        }
    }
    return {true, "500 traces, " + std::to_string(cursors) + " cursors, " + std::to_string(sets) + " expired sets"};
}

// --- AC7 ---------------------------------------------------------------------

Outcome dataset_ratio() {
    WorkloadConfig wc;
    wc.seed = 215;
    wc.tasks = 215;
    wc.turns = TurnDistribution::lognormal;
    wc.min_turns = 2;
    wc.max_turns = 100;
    wc.min_output_tokens = 40;
    wc.max_output_tokens = 120;
    const auto w = generate_workload(wc);
    ExperimentSpec spec;
    spec.run.max_turns = 128;
    const auto runs = run_experiment(w.tasks, std::make_shared<const Corpus>(w.documents), spec);
    std::map<std::string, bool> verdicts;
    for (const auto& t : runs.traces) verdicts[t.trace_id] = true;
    HindsightAnnotator ann;
    DatasetConfig cfg;
    cfg.interval = 4;
    const auto d = build_dataset(runs.traces, verdicts, ann, nullptr, cfg);
    const double ratio = static_cast<double>(d.aux_count) / static_cast<double>(d.main_count);
    const double target = 1274.0 / 215.0;
    const bool ok = d.rejected == 0 && ratio >= target * 0.7 && ratio <= target * 1.3;
    return {ok, std::to_string(d.main_count) + " main, " + std::to_string(d.aux_count) + " aux, ratio " + fmt(ratio) +
                    " vs " + fmt(target) + " +/-30%"};
}

// --- AC8 ---------------------------------------------------------------------

Outcome pipeline_determinism() {
    const auto dir = sqtest::temp_dir("acceptance_determinism");
    WorkloadConfig wc;
    wc.tasks = 12;
    const auto w = generate_workload(wc);
    const auto runs = run_experiment(w.tasks, std::make_shared<const Corpus>(w.documents), ExperimentSpec{});
    write_traces_file((dir / "traces.jsonl").string(), runs.traces);
    {
        std::ofstream v(dir / "verdicts.jsonl");
        for (const auto& t : w.tasks) v << "{\"trace_id\": \"" << t.task_id << "\", \"correct\": true}\n";
    }
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::string outs[2], manifests[2];
    for (int i = 0; i < 2; ++i) {
        GenDataOptions o;
        o.traces_path = (dir / "traces.jsonl").string();
        o.verdicts_path = (dir / "verdicts.jsonl").string();
        o.out_path = (dir / ("d" + std::to_string(i) + ".jsonl")).string();
        o.dataset.seed = 42;
        o.synthetic_logits = true;
        o.logits_top_k = 4;
        cmd_gen_data(o);
        outs[i] = slurp(o.out_path);
        manifests[i] = slurp(o.out_path + ".manifest.json");
    }
    const bool ok = !outs[0].empty() && outs[0] == outs[1] && manifests[0] == manifests[1];
    return {ok, std::to_string(outs[0].size()) + " dataset bytes identical across two runs"};
}

// --- AC9 ---------------------------------------------------------------------

Outcome budget_soundness() {
    std::mt19937_64 rng(9009);
    std::size_t feasible = 0, infeasible = 0;
    for (int i = 0; i < 1000; ++i) {
        ContextLedger l;
        l.append(Role::user, words(1 + rng() % 60), 0);
        const int turns = 1 + static_cast<int>(rng() % 12);
        CursorId next = 0;
        for (int t = 0; t < turns; ++t) {
            if (rng() % 2) l.append(Role::assistant, words(rng() % 30), t);
            if (rng() % 4) {
                l.append(Role::tool_call, words(3 + rng() % 10), t);
                l.append(Role::tool_response, response(next, 4 + rng() % 500), t, next);
                ++next;
            }
            if (next > 0 && rng() % 6 == 0) {
                const std::vector<CursorId> ids{static_cast<CursorId>(rng() % next)};
                l.clear_kv(ids, t);
            }
        }
        BudgetPolicy p;
        p.budget = 1 + rng() % 3000;
        p.sink_count = rng() % 3;
        p.recent_window = static_cast<int>(rng() % 3);
        p.scorer = static_cast<Scorer>(rng() % 3);
        const auto v = l.snapshot();
        const auto d = budget_evict(v, p, turns);
        std::size_t evictable = 0;
        for (const auto& c : v.cursors())
            if (c.open() && !is_protected(v, c, p, turns)) evictable += c.span.len;
        const bool can = v.resident_tokens() - evictable <= p.budget;
        for (CursorId id : d.command.cursor_ids) {
            const auto* c = v.find_cursor(id);
            if (!c || !c->open() || is_protected(v, *c, p, turns)) return {false, "case " + std::to_string(i) + " evicts a protected cursor"};
        }
        ContextLedger after = l;
        after.clear_kv(d.command.cursor_ids, turns);
        if (can && after.resident_tokens() > p.budget) return {false, "case " + std::to_string(i) + " over budget"};
        (can ? feasible : infeasible)++;
    }
    return {true, std::to_string(feasible) + " feasible within budget, " + std::to_string(infeasible) +
                      " infeasible, no protected cursor evicted"};
}

// --- AC10 --------------------------------------------------------------------

Outcome parser_round_trip() {
    std::mt19937_64 rng(10010);
    for (int i = 0; i < 1000; ++i) {
        EvictionCommand c;
        for (int k = static_cast<int>(rng() % 10); k > 0; --k) c.cursor_ids.push_back(static_cast<CursorId>(rng() % 500));
        c = c.normalized();
        for (auto style : {CommandStyle::strict_json, CommandStyle::relaxed}) {
            const auto p = parse_output(render_command(c, style), PolicyMode::aux);
            if (!std::holds_alternative<EvictionCommand>(p) || std::get<EvictionCommand>(p) != c)
                return {false, "round trip failed for " + render_command(c, style)};
        }
    }
    const auto literal = parse_output("{del_cursors: [0]}", PolicyMode::aux);
    const bool ok = std::holds_alternative<EvictionCommand>(literal) &&
                    std::get<EvictionCommand>(literal).cursor_ids == std::vector<CursorId>{0};
    return {ok, "1000 commands in strict and relaxed notation, \"{del_cursors: [0]}\" -> [0]"};
}

// --- AC11 --------------------------------------------------------------------

Outcome failure_taxonomy() {
    FixedTools tools({3000});
    RunConfig cfg;
    cfg.max_turns = 50;
    cfg.max_resident = 2000;

    ScriptedPolicy malformed({"```tool {\"name\": \"search\", \"args\": {\"query\": }```", "I will search now."});
    const auto a = run("q", malformed, tools, cfg);
    ScriptedPolicy overflow({search_step("open the big one", "everything"), "FINAL: x"});
    const auto b = run("q", overflow, tools, cfg);
    FixedTools small({});
    std::vector<std::string> loop(200, search_step("again", "same"));
    ScriptedPolicy looping(loop);
    cfg.max_resident = 1000000;
    const auto c = run("q", looping, small, cfg);

    const bool ok = a.metrics.outcome.kind == OutcomeKind::unparsable &&
                    b.metrics.outcome.kind == OutcomeKind::context_limit &&
                    c.metrics.outcome.kind == OutcomeKind::turn_limit;
    return {ok, std::string(to_string(a.metrics.outcome.kind)) + " / " + std::string(to_string(b.metrics.outcome.kind)) +
                    " / " + std::string(to_string(c.metrics.outcome.kind))};
}

// --- AC12 --------------------------------------------------------------------

// Minimal OpenAI-compatible endpoint: main calls walk search -> open ->
// answer through function calling; memory-management calls drop the
// search results once the page has been opened.
class MockChatServer {
public:
    MockChatServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("messages")) {
                res.status = 400;
                return;
            }
            std::string all;
            for (const auto& m : body["messages"])
                if (m.contains("content") && m["content"].is_string()) all += m["content"].get<std::string>() + "\n";
            const std::string last = body["messages"].back().value("content", "");
            nlohmann::json msg = {{"role", "assistant"}, {"content", nullptr}};
            if (last.find(std::string(kDefaultTriggerPhrase)) != std::string::npos) {
                msg["content"] = all.find("[Cursor 1]") != std::string::npos
                                     ? "The hit list in [Cursor 0] is no longer needed. {del_cursors: [0]}"
                                     : "Nothing to remove. {del_cursors: []}";
            } else if (all.find("[Cursor 0]") == std::string::npos) {
                msg["content"] = "Searching first.";
                msg["tool_calls"] = {{{"id", "c0"},
                                      {"type", "function"},
                                      {"function", {{"name", "search"}, {"arguments", R"({"query": "GTC 2026 dates"})"}}}}};
            } else if (all.find("[Cursor 1]") == std::string::npos) {
                msg["content"] = "Opening the page from [Cursor 0].";
                msg["tool_calls"] = {{{"id", "c1"},
                                      {"type", "function"},
                                      {"function", {{"name", "open"}, {"arguments", R"({"doc_id": "gtc-2026"})"}}}}};
            } else if (all.find("[Cursor 2]") == std::string::npos) {
                msg["content"] = "[Cursor 1] has the dates; now the weekend.";
                msg["tool_calls"] = {{{"id", "c2"},
                                      {"type", "function"},
                                      {"function", {{"name", "search"}, {"arguments", R"({"query": "long weekend March 2026"})"}}}}};
            } else {
                msg["content"] = "FINAL: Mar 20 per [Cursor 1] and [Cursor 2]";
            }
            res.set_content(nlohmann::json{{"choices", {{{"index", 0}, {"message", msg}}}}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockChatServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

Outcome live_smoke() {
    const char* live = std::getenv("SIDEQUEST_LIVE_ENDPOINT");
    std::unique_ptr<MockChatServer> mock;
    HttpPolicyConfig cfg;
    std::string where;
    if (live && *live) {
        cfg.endpoint.base_url = live;
        if (const char* m = std::getenv("SIDEQUEST_LIVE_MODEL")) cfg.endpoint.model = m;
        cfg.endpoint.timeout_seconds = 600;
        where = "live endpoint " + std::string(live);
    } else {
        mock = std::make_unique<MockChatServer>();
        cfg.endpoint.base_url = mock->url();
        where = "in-process mock endpoint; set SIDEQUEST_LIVE_ENDPOINT for a real model";
    }
    HttpPolicy policy(cfg);
    const auto w = walkthrough_workload();
    CorpusTools tools(std::make_shared<const Corpus>(w.documents));
    RunConfig run_cfg;
    run_cfg.trigger_interval = 1;
    run_cfg.aux_enabled = true;
    run_cfg.aux_schedule = AuxSchedule::live;
    run_cfg.max_turns = 24;
    const auto r = run(w.tasks[0].query, policy, tools, run_cfg);
    std::size_t spawns = 0, failed = 0;
    for (const auto& e : r.events) {
        spawns += e.kind == EventKind::aux_spawn;
        failed += e.kind == EventKind::aux_failed;
    }
    const bool ok = r.metrics.outcome.kind == OutcomeKind::completed && spawns >= 1 && failed == 0;
    return {ok, where + "; outcome " + std::string(to_string(r.metrics.outcome.kind)) + ", " + std::to_string(spawns) +
                    " aux spawns, " + std::to_string(r.eviction_log.size()) + " evictions, " + std::to_string(failed) +
                    " aux failures"};
}

} // namespace

int main() {
    report(1, "ledger conservation over 10k randomized sequences", ledger_conservation);
    report(2, "zero permanent token overhead with aux enabled", zero_overhead);
    report(3, "walkthrough golden run: eviction log and event order", walkthrough_golden);
    report(4, "synthetic benchmark: oracle peak reduction >= 50%", synthetic_savings);
    report(5, "KV-read accounting equals step-by-step replay", kv_read_accounting);
    report(6, "last-use and expired sets equal brute-force scan", hindsight_equivalence);
    report(7, "aux-to-main sample ratio within 30% of 5.93", dataset_ratio);
    report(8, "dataset pipeline is byte-deterministic", pipeline_determinism);
    report(9, "budget eviction soundness on 1k ledgers", budget_soundness);
    report(10, "eviction command render/parse round trip", parser_round_trip);
    report(11, "failure taxonomy: unparsable, context_limit, turn_limit", failure_taxonomy);
    report(12, "endpoint smoke: full loop with aux spawn", live_smoke);
    std::cout << (failures == 0 ? "all 12 criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
