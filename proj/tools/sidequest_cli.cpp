// sidequest command-line driver.
#include "sidequest/error.hpp"
#include "sidequest/experiment.hpp"
#include "sidequest/synthetic.hpp"
#include "sidequest/tools.hpp"
#include "sidequest/trace.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace sq = sidequest;

namespace {

struct EndpointFlags {
    std::string url;
    std::string model;
    std::string api_key_env;
    int timeout = 0;

    void add(CLI::App* app, const std::string& prefix = "") {
        app->add_option("--" + prefix + "endpoint", url, "OpenAI-compatible base URL, e.g. http://host:8000/v1");
        app->add_option("--" + prefix + "model", model, "Model name sent to the endpoint");
        app->add_option("--" + prefix + "api-key-env", api_key_env, "Environment variable holding the API key");
        app->add_option("--" + prefix + "timeout", timeout, "Request timeout in seconds");
    }
    void apply(sq::ChatEndpointConfig& c) const {
        if (!url.empty()) c.base_url = url;
        if (!model.empty()) c.model = model;
        if (!api_key_env.empty()) c.api_key_env = api_key_env;
        if (timeout > 0) c.timeout_seconds = timeout;
    }
};

void add_run_flags(CLI::App* app, sq::RunConfig& run, std::string& accounting) {
    app->add_option("--interval,-k", run.trigger_interval, "Aux trigger interval K");
    app->add_option("--max-turns", run.max_turns, "Turn limit");
    app->add_option("--max-resident", run.max_resident, "Context limit in tokens");
    app->add_option("--aux-latency", run.aux_latency_turns, "Turns before a simulated aux thread finishes");
    app->add_option("--aux-accounting", accounting, "naive | shared_prefix")
        ->check(CLI::IsMember({"naive", "shared_prefix"}));
}

void set_accounting(sq::RunConfig& run, const std::string& accounting) {
    if (!accounting.empty()) run.aux_accounting = *sq::parse_aux_accounting(accounting);
}

int do_run(sq::ExperimentSpec spec, const std::string& config, const std::string& accounting,
           const EndpointFlags& endpoint, bool live) {
    if (!config.empty()) sq::apply_config_file(config, spec);
    set_accounting(spec.run, accounting);
    if (!endpoint.url.empty() || live) {
        sq::HttpPolicyConfig h = spec.endpoint.value_or(sq::HttpPolicyConfig{});
        endpoint.apply(h.endpoint);
        spec.endpoint = h;
        spec.live_only = live;
    }
    const auto report = sq::cmd_run(spec);
    std::cout << sq::summary_csv(report.summary);
    for (const auto& f : report.failures) std::cerr << "run failed: " << f << "\n";
    std::cerr << "wrote " << report.rows.size() << " runs to " << spec.output_dir << "\n";
    return 0;
}

int do_synth(const std::string& out_dir, std::size_t tasks, std::uint64_t seed, bool lognormal, int interval) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    sq::Workload w;
    if (tasks == 0) {
        w = sq::walkthrough_workload();
    } else {
        sq::WorkloadConfig cfg;
        cfg.seed = seed;
        cfg.tasks = tasks;
        if (lognormal) cfg.turns = sq::TurnDistribution::lognormal;
        w = sq::generate_workload(cfg);
        for (auto& t : w.tasks) t.aux_script = sq::hindsight_aux_script(t, interval);
    }
    {
        std::ofstream out(fs::path(out_dir) / "corpus.jsonl", std::ios::binary);
        sq::write_corpus_jsonl(out, w.documents);
    }
    {
        std::ofstream out(fs::path(out_dir) / "tasks.jsonl", std::ios::binary);
        sq::write_tasks_jsonl(out, w.tasks);
    }
    {
        std::ofstream out(fs::path(out_dir) / "verdicts.jsonl", std::ios::binary);
        for (const auto& t : w.tasks) out << nlohmann::json{{"trace_id", t.task_id}, {"correct", true}}.dump() << "\n";
    }
    std::cerr << "wrote " << w.tasks.size() << " tasks and " << w.documents.size() << " documents to " << out_dir
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-driven KV-cache eviction for tool-using agents"};
    app.require_subcommand(1);

    // run
    sq::ExperimentSpec spec;
    std::string run_config, run_accounting;
    EndpointFlags run_endpoint;
    bool live = false;
    auto* run = app.add_subcommand("run", "Run every (task, strategy) pair and write reports");
    run->add_option("--tasks", spec.tasks_path, "Task file (JSONL)");
    run->add_option("--corpus", spec.corpus_path, "Corpus file (JSONL)");
    run->add_option("--strategies,-s", spec.strategies, "none, sidequest, budget:<scorer>, oracle")->delimiter(',');
    run->add_option("--runs-per-task", spec.runs_per_task);
    run->add_option("--seed", spec.seed);
    run->add_option("--output-dir,-o", spec.output_dir);
    run->add_option("--jobs,-j", spec.jobs, "Parallel runs");
    run->add_option("--budget", spec.budget.budget, "Token budget for budget strategies");
    run->add_option("--config,-c", run_config, "JSON config overlay");
    run->add_flag("--live", live, "Send every task to the endpoint instead of its script");
    add_run_flags(run, spec.run, run_accounting);
    run_endpoint.add(run);

    // gen-data
    sq::GenDataOptions gen;
    EndpointFlags annot;
    auto* gd = app.add_subcommand("gen-data", "Synthesize training samples from recorded traces");
    gd->add_option("--traces", gen.traces_path)->required();
    gd->add_option("--verdicts", gen.verdicts_path);
    gd->add_option("--out,-o", gen.out_path);
    gd->add_option("--manifest", gen.manifest_path);
    gd->add_option("--interval,-k", gen.dataset.interval);
    gd->add_option("--seed", gen.dataset.seed);
    gd->add_option("--lambda", gen.dataset.lambda_weight);
    gd->add_option("--upsample", gen.dataset.main_upsample);
    gd->add_flag("--synthetic-logits", gen.synthetic_logits);
    gd->add_option("--logits-top-k", gen.logits_top_k);
    annot.add(gd, "annotator-");

    // replay
    std::string replay_path, replay_strategy = "none", replay_accounting, aux_script_path;
    sq::ReplayOptions replay;
    EndpointFlags replay_endpoint;
    auto* rp = app.add_subcommand("replay", "Re-run a recorded trace under another strategy");
    rp->add_option("trace", replay_path)->required();
    rp->add_option("--strategy,-s", replay_strategy);
    rp->add_option("--budget", replay.budget.budget);
    rp->add_option("--aux-script", aux_script_path, "JSON array of recorded aux outputs");
    add_run_flags(rp, replay.run, replay_accounting);
    replay_endpoint.add(rp);

    // inspect-trace
    std::string inspect_path;
    auto* it = app.add_subcommand("inspect-trace", "Print cursors, last uses and expiry of recorded traces");
    it->add_option("trace", inspect_path)->required();

    // synth
    std::string synth_dir = "workload";
    std::size_t synth_tasks = 0;
    std::uint64_t synth_seed = 7;
    bool synth_lognormal = false;
    int synth_interval = 4;
    auto* sy = app.add_subcommand("synth", "Write a scripted demo workload (corpus, tasks, verdicts)");
    sy->add_option("--out,-o", synth_dir);
    sy->add_option("--tasks", synth_tasks, "Generated tasks; 0 writes the walkthrough task");
    sy->add_option("--seed", synth_seed);
    sy->add_flag("--lognormal", synth_lognormal, "Long-tailed turn counts");
    sy->add_option("--interval,-k", synth_interval, "Interval the aux scripts are laid out for");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return do_run(spec, run_config, run_accounting, run_endpoint, live);
        if (*gd) {
            if (!annot.url.empty()) {
                sq::ChatEndpointConfig c;
                annot.apply(c);
                gen.annotator_endpoint = c;
            }
            const auto r = sq::cmd_gen_data(gen);
            std::cout << "main=" << r.main_count << " aux=" << r.aux_count << " rejected=" << r.rejected
                      << " skipped_incorrect=" << r.skipped_incorrect << "\n";
            return 0;
        }
        if (*rp) {
            const auto s = sq::parse_strategy(replay_strategy);
            if (!s) throw sq::ConfigError("unknown strategy '" + replay_strategy + "'");
            replay.strategy = *s;
            set_accounting(replay.run, replay_accounting);
            if (!aux_script_path.empty()) {
                std::ifstream in(aux_script_path, std::ios::binary);
                if (!in) throw sq::ConfigError("cannot open " + aux_script_path);
                replay.aux_script = nlohmann::json::parse(in).get<std::vector<std::string>>();
            }
            std::unique_ptr<sq::HttpPolicy> aux;
            if (!replay_endpoint.url.empty()) {
                sq::HttpPolicyConfig h;
                replay_endpoint.apply(h.endpoint);
                aux = std::make_unique<sq::HttpPolicy>(h);
                replay.aux_policy = aux.get();
                replay.run.aux_schedule = sq::AuxSchedule::live;
            }
            const auto m = sq::cmd_replay(replay_path, replay);
            sq::write_report_json(std::cout, {{replay_path, replay_strategy, m}});
            return 0;
        }
        if (*it) {
            for (const auto& t : sq::read_traces_file(inspect_path)) std::cout << sq::inspect_trace(t) << "\n";
            return 0;
        }
        if (*sy) return do_synth(synth_dir, synth_tasks, synth_seed, synth_lognormal, synth_interval);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
