#include "sidequest/experiment.hpp"

#include "sidequest/error.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace sidequest {

namespace fs = std::filesystem;

void ExperimentSpec::validate() const {
    if (strategies.empty()) throw ConfigError("at least one strategy is required");
    for (const auto& s : strategies)
        if (!parse_strategy(s)) throw ConfigError("unknown strategy '" + s + "'");
    if (runs_per_task < 1) throw ConfigError("runs_per_task must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (budget.budget == 0) throw ConfigError("budget must be > 0");
    run.validate();
}

void apply_config(const nlohmann::json& c, ExperimentSpec& spec) {
    if (!c.is_object()) throw ConfigError("config must be a JSON object");
    try {
        auto& r = spec.run;
        if (c.contains("trigger_interval")) r.trigger_interval = c["trigger_interval"].get<int>();
        if (c.contains("trigger_phrase")) r.trigger_phrase = c["trigger_phrase"].get<std::string>();
        if (c.contains("max_turns")) r.max_turns = c["max_turns"].get<int>();
        if (c.contains("max_resident")) r.max_resident = c["max_resident"].get<std::size_t>();
        if (c.contains("aux_latency_turns")) r.aux_latency_turns = c["aux_latency_turns"].get<int>();
        if (c.contains("unparsable_retries")) r.unparsable_retries = c["unparsable_retries"].get<int>();
        if (c.contains("charge_shared_once")) r.charge_shared_once = c["charge_shared_once"].get<bool>();
        if (c.contains("aux_accounting")) {
            const auto m = parse_aux_accounting(c["aux_accounting"].get<std::string>());
            if (!m) throw ConfigError("aux_accounting must be naive or shared_prefix");
            r.aux_accounting = *m;
        }
        if (c.contains("aux_schedule")) {
            const auto v = c["aux_schedule"].get<std::string>();
            if (v != "simulated" && v != "live") throw ConfigError("aux_schedule must be simulated or live");
            r.aux_schedule = v == "live" ? AuxSchedule::live : AuxSchedule::simulated;
        }
        if (c.contains("strategies")) spec.strategies = c["strategies"].get<std::vector<std::string>>();
        if (c.contains("evictor")) spec.strategies = {c["evictor"].get<std::string>()};
        if (c.contains("tasks")) spec.tasks_path = c["tasks"].get<std::string>();
        if (c.contains("corpus")) spec.corpus_path = c["corpus"].get<std::string>();
        if (c.contains("runs_per_task")) spec.runs_per_task = c["runs_per_task"].get<int>();
        if (c.contains("seed")) spec.seed = c["seed"].get<std::uint64_t>();
        if (c.contains("output_dir")) spec.output_dir = c["output_dir"].get<std::string>();
        if (c.contains("jobs")) spec.jobs = c["jobs"].get<int>();
        if (c.contains("budget")) {
            const auto& b = c["budget"];
            if (b.is_number()) {
                spec.budget.budget = b.get<std::size_t>();
            } else {
                if (b.contains("budget")) spec.budget.budget = b["budget"].get<std::size_t>();
                if (b.contains("sink_count")) spec.budget.sink_count = b["sink_count"].get<std::size_t>();
                if (b.contains("recent_window")) spec.budget.recent_window = b["recent_window"].get<int>();
            }
        }
        if (c.contains("tools")) {
            const auto& t = c["tools"];
            if (t.contains("top_k")) spec.tools.top_k = t["top_k"].get<std::size_t>();
            if (t.contains("chunk_tokens")) spec.tools.chunk_tokens = t["chunk_tokens"].get<std::size_t>();
            if (t.contains("snippet_tokens")) spec.tools.snippet_tokens = t["snippet_tokens"].get<std::size_t>();
        }
        if (c.contains("endpoint")) {
            const auto& e = c["endpoint"];
            HttpPolicyConfig h = spec.endpoint.value_or(HttpPolicyConfig{});
            if (e.contains("base_url")) h.endpoint.base_url = e["base_url"].get<std::string>();
            if (e.contains("model")) h.endpoint.model = e["model"].get<std::string>();
            if (e.contains("api_key_env")) h.endpoint.api_key_env = e["api_key_env"].get<std::string>();
            if (e.contains("timeout_seconds")) h.endpoint.timeout_seconds = e["timeout_seconds"].get<int>();
            if (e.contains("max_tokens")) h.endpoint.max_tokens = e["max_tokens"].get<int>();
            if (e.contains("temperature")) h.endpoint.temperature = e["temperature"].get<double>();
            if (e.contains("function_calling")) h.use_function_calling = e["function_calling"].get<bool>();
            if (e.contains("top_logprobs")) h.top_logprobs = e["top_logprobs"].get<int>();
            if (e.contains("system_prompt")) h.system_prompt = e["system_prompt"].get<std::string>();
            spec.endpoint = h;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void apply_config_file(const std::string& path, ExperimentSpec& spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false, true);
    if (j.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
    apply_config(j, spec);
}

// --- run -----------------------------------------------------------------

namespace {

struct Job {
    std::size_t task_index;
    std::string strategy;
    int rep;
};

std::string run_id_for(const ScriptedTask& task, const std::string& strategy, int rep) {
    return task.task_id + "#" + strategy + "#" + std::to_string(rep);
}

struct JobResult {
    ReportRow row;
    Trace trace;
    std::string failure;
};

JobResult execute_job(const ScriptedTask& task, const StrategySpec& strategy, int rep,
                      const std::shared_ptr<const Corpus>& corpus, const ExperimentSpec& spec,
                      const Trace* reference) {
    RunConfig cfg = spec.run;
    cfg.run_id = run_id_for(task, strategy.name, rep);
    cfg.aux_enabled = strategy.kind == StrategyKind::sidequest;

    std::unique_ptr<Policy> policy;
    const bool live = spec.live_only || task.main_script.empty();
    if (live) {
        if (!spec.endpoint) throw ConfigError("task '" + task.task_id + "' has no script and no endpoint is configured");
        HttpPolicyConfig h = *spec.endpoint;
        if (!h.endpoint.seed) h.endpoint.seed = spec.seed + static_cast<std::uint64_t>(rep);
        policy = std::make_unique<HttpPolicy>(h);
        cfg.aux_schedule = AuxSchedule::live;
    } else {
        policy = std::make_unique<ScriptedPolicy>(task.main_script, task.aux_script);
    }
    CorpusTools tools(corpus, spec.tools);

    std::unique_ptr<Evictor> evictor;
    if (strategy.kind == StrategyKind::budget) {
        BudgetPolicy b = spec.budget;
        b.scorer = strategy.scorer;
        evictor = std::make_unique<BudgetEvictor>(b);
    } else if (strategy.kind == StrategyKind::oracle) {
        if (!reference) throw ReplayUnsupported("oracle needs a reference trace");
        evictor = std::make_unique<OracleEvictor>(*reference);
    }

    Runtime runtime(*policy, tools, cfg, evictor.get());
    RunResult r = runtime.run(task.query);
    JobResult out;
    out.row = {cfg.run_id, strategy.name, r.metrics};
    out.trace = std::move(r.trace);
    if (!r.diagnostic.empty() && r.metrics.outcome.kind == OutcomeKind::policy_error) {
        out.failure = cfg.run_id + ": " + r.diagnostic;
    }
    return out;
}

template <typename Fn>
std::vector<JobResult> run_jobs(const std::vector<Job>& jobs, int parallelism, Fn&& fn) {
    std::vector<JobResult> results(jobs.size());
    std::size_t next = 0;
    while (next < jobs.size()) {
        std::vector<std::future<void>> batch;
        for (int k = 0; k < parallelism && next < jobs.size(); ++k, ++next) {
            const std::size_t i = next;
            batch.push_back(std::async(std::launch::async, [&, i] { results[i] = fn(jobs[i]); }));
        }
        for (auto& f : batch) f.get();
    }
    return results;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::optional<double> reduction(double baseline, double value) {
    if (baseline <= 0) return std::nullopt;
    return (baseline - value) / baseline * 100.0;
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

ExperimentReport run_experiment(const std::vector<ScriptedTask>& tasks, std::shared_ptr<const Corpus> corpus,
                                const ExperimentSpec& spec) {
    spec.validate();
    std::vector<StrategySpec> strategies;
    for (const auto& s : spec.strategies) strategies.push_back(*parse_strategy(s));
    const bool need_reference =
        std::any_of(strategies.begin(), strategies.end(), [](const StrategySpec& s) { return s.kind == StrategyKind::oracle; });

    // Uncompressed reference traces for the hindsight oracle.
    std::map<std::pair<std::size_t, int>, Trace> references;
    if (need_reference) {
        std::vector<Job> ref_jobs;
        for (std::size_t t = 0; t < tasks.size(); ++t)
            for (int rep = 0; rep < spec.runs_per_task; ++rep) ref_jobs.push_back({t, "none", rep});
        const StrategySpec none = *parse_strategy("none");
        auto refs = run_jobs(ref_jobs, spec.jobs, [&](const Job& j) {
            return execute_job(tasks[j.task_index], none, j.rep, corpus, spec, nullptr);
        });
        for (std::size_t i = 0; i < ref_jobs.size(); ++i)
            references[{ref_jobs[i].task_index, ref_jobs[i].rep}] = std::move(refs[i].trace);
    }

    std::vector<Job> jobs;
    for (std::size_t t = 0; t < tasks.size(); ++t)
        for (const auto& s : strategies)
            for (int rep = 0; rep < spec.runs_per_task; ++rep) jobs.push_back({t, s.name, rep});

    auto results = run_jobs(jobs, spec.jobs, [&](const Job& j) {
        const StrategySpec s = *parse_strategy(j.strategy);
        const Trace* ref = nullptr;
        if (s.kind == StrategyKind::oracle) ref = &references.at({j.task_index, j.rep});
        try {
            return execute_job(tasks[j.task_index], s, j.rep, corpus, spec, ref);
        } catch (const Error& e) {
            JobResult failed;
            failed.row = {run_id_for(tasks[j.task_index], j.strategy, j.rep), j.strategy, {}};
            failed.row.metrics.outcome.kind = OutcomeKind::policy_error;
            failed.failure = failed.row.run_id + ": " + e.what();
            return failed;
        }
    });

    ExperimentReport report;
    for (auto& r : results) {
        report.rows.push_back(r.row);
        if (!r.trace.messages.empty()) report.traces.push_back(std::move(r.trace));
        if (!r.failure.empty()) report.failures.push_back(std::move(r.failure));
    }
    report.summary = summarize(report.rows, spec.strategies);
    return report;
}

std::vector<StrategySummary> summarize(const std::vector<ReportRow>& rows, const std::vector<std::string>& order) {
    std::vector<StrategySummary> out;
    for (const auto& name : order) {
        StrategySummary s;
        s.strategy = name;
        std::vector<double> peak, main, aux, naive, shared, total, decode;
        for (const auto& r : rows) {
            if (r.strategy != name) continue;
            const auto& m = r.metrics;
            ++s.runs;
            peak.push_back(static_cast<double>(m.peak_resident));
            main.push_back(static_cast<double>(m.kv_reads_main));
            aux.push_back(static_cast<double>(m.kv_reads_aux));
            naive.push_back(static_cast<double>(m.kv_reads_aux_naive));
            shared.push_back(static_cast<double>(m.kv_reads_aux_shared_prefix));
            total.push_back(static_cast<double>(m.kv_reads_total()));
            decode.push_back(static_cast<double>(m.decode_tokens()));
            ++s.outcomes[std::string(to_string(m.outcome.kind))];
        }
        s.mean_peak_resident = mean(peak);
        s.mean_kv_reads_main = mean(main);
        s.mean_kv_reads_aux = mean(aux);
        s.mean_kv_reads_aux_naive = mean(naive);
        s.mean_kv_reads_aux_shared_prefix = mean(shared);
        s.mean_kv_reads_total = mean(total);
        s.mean_decode_tokens = mean(decode);
        out.push_back(std::move(s));
    }
    const auto base = std::find_if(out.begin(), out.end(), [](const StrategySummary& s) { return s.strategy == "none"; });
    if (base != out.end()) {
        const StrategySummary b = *base;
        for (auto& s : out) {
            s.peak_reduction_pct = reduction(b.mean_peak_resident, s.mean_peak_resident);
            s.kv_reads_reduction_pct = reduction(b.mean_kv_reads_total, s.mean_kv_reads_total);
            s.kv_reads_reduction_naive_pct = reduction(b.mean_kv_reads_total, s.mean_kv_reads_main + s.mean_kv_reads_aux_naive);
            s.kv_reads_reduction_shared_prefix_pct =
                reduction(b.mean_kv_reads_total, s.mean_kv_reads_main + s.mean_kv_reads_aux_shared_prefix);
        }
    }
    return out;
}

std::string summary_json(const std::vector<StrategySummary>& summary) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : summary) {
        nlohmann::ordered_json j;
        j["strategy"] = s.strategy;
        j["runs"] = s.runs;
        j["mean_peak_resident"] = s.mean_peak_resident;
        j["mean_kv_reads_main"] = s.mean_kv_reads_main;
        j["mean_kv_reads_aux"] = s.mean_kv_reads_aux;
        j["mean_kv_reads_aux_naive"] = s.mean_kv_reads_aux_naive;
        j["mean_kv_reads_aux_shared_prefix"] = s.mean_kv_reads_aux_shared_prefix;
        j["mean_kv_reads_total"] = s.mean_kv_reads_total;
        j["mean_decode_tokens"] = s.mean_decode_tokens;
        j["outcomes"] = s.outcomes;
        j["peak_reduction_pct"] = opt(s.peak_reduction_pct);
        j["kv_reads_reduction_pct"] = opt(s.kv_reads_reduction_pct);
        j["kv_reads_reduction_naive_pct"] = opt(s.kv_reads_reduction_naive_pct);
        j["kv_reads_reduction_shared_prefix_pct"] = opt(s.kv_reads_reduction_shared_prefix_pct);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string summary_csv(const std::vector<StrategySummary>& summary) {
    auto opt = [](const std::optional<double>& v) { return v ? fixed(*v) : std::string(); };
    std::ostringstream os;
    os << "strategy,runs,mean_peak_resident,mean_kv_reads_main,mean_kv_reads_aux,mean_kv_reads_aux_naive,"
          "mean_kv_reads_aux_shared_prefix,mean_kv_reads_total,mean_decode_tokens,completed,unparsable,"
          "context_limit,turn_limit,policy_error,peak_reduction_pct,kv_reads_reduction_pct,"
          "kv_reads_reduction_naive_pct,kv_reads_reduction_shared_prefix_pct\n";
    for (const auto& s : summary) {
        auto count = [&](const char* k) {
            const auto it = s.outcomes.find(k);
            return it == s.outcomes.end() ? std::size_t{0} : it->second;
        };
        os << s.strategy << ',' << s.runs << ',' << fixed(s.mean_peak_resident) << ',' << fixed(s.mean_kv_reads_main)
           << ',' << fixed(s.mean_kv_reads_aux) << ',' << fixed(s.mean_kv_reads_aux_naive) << ','
           << fixed(s.mean_kv_reads_aux_shared_prefix) << ',' << fixed(s.mean_kv_reads_total) << ','
           << fixed(s.mean_decode_tokens) << ',' << count("completed") << ',' << count("unparsable") << ','
           << count("context_limit") << ',' << count("turn_limit") << ',' << count("policy_error") << ','
           << opt(s.peak_reduction_pct) << ',' << opt(s.kv_reads_reduction_pct) << ','
           << opt(s.kv_reads_reduction_naive_pct) << ',' << opt(s.kv_reads_reduction_shared_prefix_pct) << '\n';
    }
    return os.str();
}

ExperimentReport cmd_run(const ExperimentSpec& spec) {
    if (spec.tasks_path.empty() || !fs::exists(spec.tasks_path)) throw ConfigError("tasks file not found: " + spec.tasks_path);
    if (spec.corpus_path.empty() || !fs::exists(spec.corpus_path)) throw ConfigError("corpus not found: " + spec.corpus_path);
    const auto tasks = read_tasks_file(spec.tasks_path);
    const auto corpus = std::make_shared<const Corpus>(Corpus::load_file(spec.corpus_path));
    ExperimentReport report = run_experiment(tasks, corpus, spec);

    fs::create_directories(spec.output_dir);
    const fs::path dir(spec.output_dir);
    {
        std::ofstream out(dir / "runs.csv", std::ios::binary);
        write_report_csv(out, report.rows);
    }
    {
        std::ofstream out(dir / "runs.json", std::ios::binary);
        write_report_json(out, report.rows);
    }
    std::ofstream(dir / "summary.json", std::ios::binary) << summary_json(report.summary);
    std::ofstream(dir / "summary.csv", std::ios::binary) << summary_csv(report.summary);
    write_traces_file((dir / "traces.jsonl").string(), report.traces);
    return report;
}

// --- gen-data ------------------------------------------------------------

std::map<std::string, bool> resolve_verdicts(const std::vector<Trace>& traces, const std::map<std::string, bool>& raw) {
    std::map<std::string, bool> out;
    for (const auto& t : traces) {
        auto it = raw.find(t.trace_id);
        if (it == raw.end()) it = raw.find(t.trace_id.substr(0, t.trace_id.find('#')));
        if (it != raw.end()) out[t.trace_id] = it->second;
    }
    return out;
}

DatasetResult cmd_gen_data(const GenDataOptions& o) {
    const auto traces = read_traces_file(o.traces_path);
    std::map<std::string, bool> verdicts;
    if (!o.verdicts_path.empty()) verdicts = resolve_verdicts(traces, read_verdicts_file(o.verdicts_path));

    std::unique_ptr<Annotator> annotator;
    if (o.annotator_endpoint) annotator = std::make_unique<ChatAnnotator>(*o.annotator_endpoint);
    else annotator = std::make_unique<HindsightAnnotator>();
    std::unique_ptr<LogitsSource> logits;
    if (o.synthetic_logits) logits = std::make_unique<SyntheticLogitsSource>(o.logits_top_k);

    DatasetResult result = build_dataset(traces, verdicts, *annotator, logits.get(), o.dataset);
    {
        std::ofstream out(o.out_path, std::ios::binary);
        if (!out) throw FormatError("cannot write dataset " + o.out_path);
        write_dataset(out, result, o.dataset.main_upsample);
    }
    const std::string manifest = o.manifest_path.empty() ? o.out_path + ".manifest.json" : o.manifest_path;
    std::ofstream(manifest, std::ios::binary) << dataset_manifest(result, o.dataset);
    return result;
}

// --- replay --------------------------------------------------------------

namespace {

// Hands back recorded tool responses in order.
class RecordedTools final : public ToolBackend {
public:
    explicit RecordedTools(std::vector<std::string> outputs) : outputs_(std::move(outputs)) {}
    ToolOutput execute(const ToolCall&) override {
        const CursorId id = next_++;
        if (static_cast<std::size_t>(id) >= outputs_.size()) return {id, cursor_tag(id) + " error: no recorded output\n"};
        return {id, outputs_[static_cast<std::size_t>(id)]};
    }
    void reset() override { next_ = 0; }

private:
    std::vector<std::string> outputs_;
    CursorId next_ = 0;
};

// Main calls from the recording, aux calls from a live policy.
class SplitPolicy final : public Policy {
public:
    SplitPolicy(Policy& main, Policy& aux) : main_(main), aux_(aux) {}
    PolicyOutput generate(const PolicyRequest& r) override {
        return r.mode == PolicyMode::main ? main_.generate(r) : aux_.generate(r);
    }

private:
    Policy& main_;
    Policy& aux_;
};

} // namespace

std::vector<std::string> recorded_main_outputs(const Trace& trace) {
    std::vector<std::string> out;
    std::map<int, std::vector<const Message*>> by_turn;
    for (const auto& m : trace.messages)
        if (m.role != Role::user && m.role != Role::tool_response) by_turn[m.turn].push_back(&m);
    std::set<int> turns;
    for (const auto& [t, _] : by_turn) turns.insert(t);
    for (const auto& d : trace.discarded) turns.insert(d.turn);

    for (int t : turns) {
        for (const auto& d : trace.discarded)
            if (d.turn == t) out.push_back(d.text);
        const auto it = by_turn.find(t);
        if (it == by_turn.end()) continue;
        const Message* thought = nullptr;
        const Message* call = nullptr;
        const Message* final = nullptr;
        for (const Message* m : it->second) {
            if (m->role == Role::assistant) thought = m;
            else if (m->role == Role::tool_call) call = m;
            else if (m->role == Role::final_answer) final = m;
        }
        if (final) out.push_back(final->text);
        else if (call) out.push_back(thought ? thought->text + "\n" + call->text : call->text);
        else if (thought) out.push_back(thought->text);
    }
    return out;
}

RunResult replay_trace(const Trace& trace, const ReplayOptions& o) {
    const bool aux = o.strategy.kind == StrategyKind::sidequest;
    if (aux && o.aux_script.empty() && !o.aux_policy) {
        throw ReplayUnsupported("sidequest replay needs recorded aux outputs or a live policy");
    }
    std::string query;
    std::vector<std::string> tool_outputs;
    for (const auto& m : trace.messages) {
        if (m.role == Role::user && query.empty()) query = m.text;
        if (m.role == Role::tool_response) tool_outputs.push_back(m.text);
    }

    ScriptedPolicy recorded(recorded_main_outputs(trace), o.aux_script);
    std::optional<SplitPolicy> split;
    Policy* policy = &recorded;
    if (aux && o.aux_script.empty()) {
        split.emplace(recorded, *o.aux_policy);
        policy = &*split;
    }
    RecordedTools tools(std::move(tool_outputs));

    std::unique_ptr<Evictor> evictor;
    if (o.strategy.kind == StrategyKind::budget) {
        BudgetPolicy b = o.budget;
        b.scorer = o.strategy.scorer;
        evictor = std::make_unique<BudgetEvictor>(b);
    } else if (o.strategy.kind == StrategyKind::oracle) {
        evictor = std::make_unique<OracleEvictor>(trace);
    }

    RunConfig cfg = o.run;
    cfg.run_id = trace.trace_id;
    cfg.aux_enabled = aux;
    Runtime runtime(*policy, tools, cfg, evictor.get());
    return runtime.run(query);
}

RunMetrics cmd_replay(const std::string& trace_path, const ReplayOptions& options) {
    const auto traces = read_traces_file(trace_path);
    if (traces.empty()) throw FormatError("no trace in " + trace_path);
    return replay_trace(traces.front(), options).metrics;
}

// --- inspect -------------------------------------------------------------

std::string inspect_trace(const Trace& trace) {
    std::ostringstream os;
    std::size_t total = 0, evicted = 0;
    for (const auto& m : trace.messages) {
        total += m.span.len;
        if (!m.resident()) evicted += m.span.len;
    }
    os << "trace " << trace.trace_id << " (" << (trace.outcome.empty() ? "unknown outcome" : trace.outcome) << ")\n";
    os << "task: " << trace.task << "\n";
    os << "messages: " << trace.messages.size() << ", turns: " << trace.final_turn() + 1 << ", tokens: " << total
       << " (evicted " << evicted << ", resident " << total - evicted << ")\n";
    os << "final citations: " << format_id_list(trace.final_citations) << "\n";
    const auto last = last_use_indices(trace);
    os << "cursors:\n";
    for (const auto& c : trace_cursors(trace)) {
        os << "  " << cursor_tag(c.id) << " opened turn " << c.opened_turn << ", span [" << c.span.start << ", "
           << c.span.end() << "), " << c.span.len << " tokens, last use turn " << last.at(c.id);
        const auto& resp = trace.messages[c.response_index];
        if (resp.evicted_at_turn) os << ", evicted at turn " << *resp.evicted_at_turn;
        os << "\n";
    }
    os << "expired by turn:\n";
    for (int t = 0; t <= trace.final_turn() + 1; ++t) {
        os << "  t=" << t << " " << format_id_list(expired_at(trace, t)) << "\n";
    }
    return os.str();
}

} // namespace sidequest
