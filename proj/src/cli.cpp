#include "agentforest/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "agentforest/backends.hpp"
#include "agentforest/ensemble.hpp"
#include "agentforest/pipelines.hpp"
#include "agentforest/rng.hpp"
#include "agentforest/synth.hpp"

namespace fs = std::filesystem;

namespace agentforest {

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    if (out.empty()) throw config_error("empty integer list: '" + csv + "'");
    return out;
}

std::vector<int> default_curve_sizes(int n) {
    std::set<int> sizes{n};
    for (int m : {1, 10, 20, 30, 40})
        if (m <= n) sizes.insert(m);
    return {sizes.begin(), sizes.end()};
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
    std::ostringstream os;
    os << "m,mean_accuracy,std_error,n_runs\n";
    os.precision(10);
    for (const auto& p : points)
        os << p.m << "," << p.mean_accuracy << "," << p.std_error << "," << p.n_runs << "\n";
    return os.str();
}

std::vector<CurvePoint> parse_curve_csv(const std::string& csv) {
    std::vector<CurvePoint> out;
    std::stringstream ss(csv);
    std::string line;
    if (!std::getline(ss, line) || line != "m,mean_accuracy,std_error,n_runs")
        throw config_error("curve csv: bad header");
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        CurvePoint p;
        std::stringstream ls(line);
        std::string f;
        std::getline(ls, f, ',');
        p.m = std::stoi(f);
        std::getline(ls, f, ',');
        p.mean_accuracy = std::stod(f);
        std::getline(ls, f, ',');
        p.std_error = std::stod(f);
        std::getline(ls, f, ',');
        p.n_runs = std::stoi(f);
        out.push_back(p);
    }
    return out;
}

namespace {

struct BackendFlags {
    std::string backend = "sim";
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    long timeout_ms = 30000;
    int max_retries = 2;
    long retry_base_ms = 500;
    std::string cache_dir;
    std::string replay_inner = "openai";

    std::string sim_mode = "flat";
    double sim_p_correct = 1.0;
    int sim_k_wrong = 1;
    double sim_base_skill = 1.0;
    double sim_alpha = 1.0;
    double sim_beta = 0.25;
    double sim_prior_weight = 0.0;
    double sim_inherent_power = 1.0;
    double sim_i = 1.0;
    double sim_s = 1.0;
    double sim_step_p = 1.0;
    int sim_step_k_wrong = 3;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
    cmd->add_option("--backend", f.backend, "backend kind: sim | openai | replay")
        ->check(CLI::IsMember({"sim", "openai", "replay"}));
    cmd->add_option("--base-url", f.base_url, "chat-completions base URL");
    cmd->add_option("--model", f.model, "model name sent to the endpoint");
    cmd->add_option("--api-key-env", f.api_key_env, "env var holding the API key");
    cmd->add_option("--timeout-ms", f.timeout_ms, "per-request timeout");
    cmd->add_option("--max-retries", f.max_retries, "retries after the first attempt");
    cmd->add_option("--retry-base-ms", f.retry_base_ms, "backoff base (exponential, full jitter)");
    cmd->add_option("--cache-dir", f.cache_dir, "replay cache directory");
    cmd->add_option("--replay-inner", f.replay_inner, "inner backend for replay: openai | sim")
        ->check(CLI::IsMember({"openai", "sim"}));

    cmd->add_option("--sim-mode", f.sim_mode, "sim agent mode: flat | synthetic | stepwise")
        ->check(CLI::IsMember({"flat", "synthetic", "stepwise"}));
    cmd->add_option("--sim-p-correct", f.sim_p_correct, "flat agent correctness probability");
    cmd->add_option("--sim-k-wrong", f.sim_k_wrong, "flat agent wrong-answer alternatives");
    cmd->add_option("--sim-base-skill", f.sim_base_skill, "synthetic agent base skill");
    cmd->add_option("--sim-alpha", f.sim_alpha, "synthetic agent difficulty weight");
    cmd->add_option("--sim-beta", f.sim_beta, "synthetic agent step weight");
    cmd->add_option("--sim-prior-weight", f.sim_prior_weight,
                    "synthetic agent prior-probability weight");
    cmd->add_option("--sim-inherent-power", f.sim_inherent_power,
                    "exponent on ln(1+I) in the synthetic agent");
    cmd->add_option("--sim-I", f.sim_i, "difficulty I the synthetic agent is configured for");
    cmd->add_option("--sim-S", f.sim_s, "step count S the synthetic agent is configured for");
    cmd->add_option("--sim-step-p", f.sim_step_p, "stepwise agent per-step correctness");
    cmd->add_option("--sim-step-k-wrong", f.sim_step_k_wrong,
                    "stepwise agent wrong-answer alternatives");
}

SimAgentModel sim_model_from_flags(const BackendFlags& f) {
    SimAgentModel m;
    if (f.sim_mode == "flat")
        m.mode = SimAgentModel::Mode::flat;
    else if (f.sim_mode == "synthetic")
        m.mode = SimAgentModel::Mode::synthetic_aware;
    else
        m.mode = SimAgentModel::Mode::stepwise;
    m.p_correct = f.sim_p_correct;
    m.k_wrong = f.sim_k_wrong;
    m.base_skill = f.sim_base_skill;
    m.alpha = f.sim_alpha;
    m.beta = f.sim_beta;
    m.prior_weight = f.sim_prior_weight;
    m.inherent_power = f.sim_inherent_power;
    m.sim_I = f.sim_i;
    m.sim_S = f.sim_s;
    m.per_step_p_correct = f.sim_step_p;
    m.step_k_wrong = f.sim_step_k_wrong;
    m.validate();
    return m;
}

BackendConfig backend_from_flags(const BackendFlags& f) {
    auto make_http = [&f] {
        HttpBackend h;
        h.base_url = f.base_url;
        h.model = f.model;
        h.api_key_env = f.api_key_env;
        h.timeout_ms = f.timeout_ms;
        h.max_retries = f.max_retries;
        h.retry_base_ms = f.retry_base_ms;
        h.validate();
        return h;
    };

    BackendConfig cfg;
    if (f.backend == "sim") {
        cfg.backend_id = "sim";
        cfg.variant = sim_model_from_flags(f);
    } else if (f.backend == "openai") {
        cfg.backend_id = f.model;
        cfg.variant = make_http();
    } else {
        if (f.cache_dir.empty()) throw config_error("replay backend needs --cache-dir");
        auto inner = std::make_shared<BackendConfig>();
        if (f.replay_inner == "sim") {
            inner->backend_id = "sim";
            inner->variant = sim_model_from_flags(f);
        } else {
            inner->backend_id = f.model;
            inner->variant = make_http();
        }
        ReplayBackend rb;
        rb.cache_dir = f.cache_dir;
        rb.inner = std::move(inner);
        cfg.backend_id = "replay";
        cfg.variant = std::move(rb);
    }
    return cfg;
}

struct RunFlags {
    std::string tasks_path;
    std::string out_dir;
    std::string sidecar_path;
    int n = 40;
    int runs = 10;
    double temperature = 1.0;
    double top_p = 1.0;
    uint64_t seed = 0;
    int max_in_flight = 8;
    std::string method = "vanilla";
    std::string stages;
    std::string curve_sizes;
    bool no_method_cap = false;
    int per_step_n = 0;
};

SamplingParams params_from_flags(const RunFlags& f) {
    SamplingParams p;
    p.n = f.n;
    p.temperature = f.temperature;
    p.top_p = f.top_p;
    p.max_in_flight = f.max_in_flight;
    p.seed = f.seed;
    p.validate();
    return p;
}

struct SidecarCell {
    SyntheticSpec spec;
    Partition part;
};

SidecarCell load_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open sidecar: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error("malformed sidecar " + path + ": " + e.what());
    }
    SidecarCell c;
    c.spec.I = j.at("I").get<long long>();
    c.spec.S = j.at("S").get<int>();
    c.spec.K = j.at("K").get<int>();
    c.spec.seed = j.at("cell_seed").get<uint64_t>();
    c.part.boundaries = j.at("boundaries").get<std::vector<double>>();
    c.part.interval_probs = j.at("interval_probs").get<std::vector<double>>();
    return c;
}

uint64_t parse_task_seed(const std::string& task_id) {
    const auto pos = task_id.rfind("-s");
    if (pos == std::string::npos)
        throw config_error("task id '" + task_id + "' carries no generation seed");
    return std::stoull(task_id.substr(pos + 2));
}

void write_meta(const fs::path& dir, const std::string& command, const std::string& method,
                const std::string& backend, long real_wall_ms) {
    nlohmann::json meta{{"command", command},
                        {"method", method},
                        {"backend", backend},
                        {"created_unix_ms",
                         std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count()},
                        {"real_wall_ms", real_wall_ms}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
}

int cmd_run(const BackendFlags& bf, const RunFlags& rf) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto backend = backend_from_flags(bf);
    const auto tasks = load_tasks_jsonl(rf.tasks_path);
    if (tasks.empty()) throw config_error("task file is empty: " + rf.tasks_path);
    if (rf.runs < 1) throw config_error("--runs must be >= 1");

    SamplingParams base_params = params_from_flags(rf);
    const auto curve_sizes = rf.curve_sizes.empty() ? default_curve_sizes(rf.n)
                                                    : parse_int_list(rf.curve_sizes);
    for (int m : curve_sizes)
        if (m < 1 || m > rf.n)
            throw config_error("curve size " + std::to_string(m) + " outside [1, n]");

    std::optional<SidecarCell> cell;
    if (!rf.sidecar_path.empty()) cell = load_sidecar(rf.sidecar_path);

    ComposedMethod method;
    std::vector<int> stages;
    if (rf.method == "stepwise") {
        // handled below
    } else if (rf.method == "hierarchical") {
        if (rf.stages.empty()) throw config_error("--method hierarchical needs --stages");
        stages = parse_int_list(rf.stages);
        if (!cell) throw config_error("--method hierarchical needs --sidecar");
    } else {
        method = make_method(rf.method == "vanilla" ? "identity" : rf.method);
        if (rf.no_method_cap) method.ensemble_cap = 0;
    }

    fs::create_directories(rf.out_dir);
    std::vector<RunRecord> records;
    std::vector<std::string> failures;

    for (int r = 0; r < rf.runs; ++r) {
        SamplingParams params = base_params;
        params.seed = base_params.seed + static_cast<uint64_t>(r);
        const std::string run_id = "run" + std::to_string(r);
        for (const auto& task : tasks) {
            try {
                if (rf.method == "stepwise") {
                    StepPlan plan;
                    std::optional<SyntheticTask> st;
                    if (cell) {
                        SyntheticSpec spec = cell->spec;
                        spec.seed = parse_task_seed(task.id);
                        st = generate(spec, cell->part);
                        plan = make_accumulation_plan(*st);
                        auto out = run_stepwise(backend, sum_task(*st), plan, params, run_id,
                                                rf.per_step_n);
                        records.push_back(std::move(out.record));
                    } else {
                        if (task.steps.empty())
                            throw config_error("task '" + task.id +
                                               "' has no steps for --method stepwise");
                        plan.steps = task.steps;
                        plan.step_kind = task.kind;
                        auto out =
                            run_stepwise(backend, task, plan, params, run_id, rf.per_step_n);
                        records.push_back(std::move(out.record));
                    }
                } else if (rf.method == "hierarchical") {
                    SyntheticSpec spec = cell->spec;
                    spec.seed = parse_task_seed(task.id);
                    const auto st = generate(spec, cell->part);
                    HierarchySpec hs;
                    hs.stages = stages;
                    hs.stage_backends = {backend};
                    auto out = run_hierarchical(hs, st, params, run_id);
                    records.push_back(std::move(out.record));
                } else {
                    auto out = run_composed(method, backend, task, params, run_id);
                    records.push_back(std::move(out.record));
                }
            } catch (const std::exception& e) {
                failures.push_back(run_id + "/" + task.id + ": " + e.what());
            }
        }
    }

    if (records.empty()) {
        for (const auto& f : failures) std::cerr << "error: " << f << "\n";
        std::cerr << "error: every task failed\n";
        return kExitBackend;
    }

    {
        std::ofstream out(fs::path(rf.out_dir) / "records.jsonl");
        for (const auto& rec : records) out << nlohmann::json(rec).dump() << "\n";
    }

    // summary over tasks that carry correctness
    std::vector<RunRecord> scored;
    for (const auto& rec : records)
        if (rec.correct_at_full.has_value()) scored.push_back(rec);
    if (!scored.empty()) {
        std::vector<int> usable;
        for (int m : curve_sizes) {
            bool everywhere = true;
            for (const auto& rec : scored) {
                bool found = false;
                for (const auto& e : rec.vote_curve) found = found || e.m == m;
                everywhere = everywhere && found;
            }
            if (everywhere) usable.push_back(m);
        }
        if (!usable.empty()) {
            std::ofstream out(fs::path(rf.out_dir) / "summary.csv");
            out << curve_csv(accuracy_curve(scored, usable));
        }
    }

    const long wall = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                            std::chrono::steady_clock::now() - t0)
                                            .count());
    write_meta(rf.out_dir, "run", rf.method, bf.backend, wall);

    if (!failures.empty()) {
        for (const auto& f : failures) std::cerr << "task failure: " << f << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

struct SynthFlags {
    std::string i_list = "10,100,400";
    std::string s_list = "4";
    std::string k_list = "4";
    uint64_t seed = 0;
    int episodes = 10;
    std::string out_dir;
    bool chain = false;
    int n = 40;
    int runs = 10;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_in_flight = 8;
};

int cmd_synth(const BackendFlags& bf, const SynthFlags& sf) {
    if (sf.out_dir.empty()) throw config_error("synth needs --out");
    if (sf.episodes < 1) throw config_error("--episodes must be >= 1");
    fs::create_directories(sf.out_dir);

    std::vector<long long> is;
    for (int v : parse_int_list(sf.i_list)) is.push_back(v);
    const auto ss = parse_int_list(sf.s_list);
    const auto ks = parse_int_list(sf.k_list);

    std::vector<GainRow> gain_rows;
    for (long long I : is)
        for (int S : ss)
            for (int K : ks) {
                SyntheticSpec cell_spec;
                cell_spec.I = I;
                cell_spec.S = S;
                cell_spec.K = K;
                cell_spec.seed = derive_seed(
                    sf.seed, "cell-" + std::to_string(I) + "-" + std::to_string(S) + "-" +
                                 std::to_string(K),
                    0);
                cell_spec.validate();

                const auto dist = sum_distribution(cell_spec);
                Partition part;
                try {
                    part = partition(dist, K);
                } catch (const validation_error& e) {
                    std::cerr << "cell I=" << I << " S=" << S << " K=" << K
                              << " degenerate: " << e.what() << "\n";
                    continue;
                }

                std::ostringstream stem;
                stem << "I" << I << "_S" << S << "_K" << K;
                const fs::path task_path = fs::path(sf.out_dir) / ("tasks_" + stem.str() + ".jsonl");
                const fs::path side_path =
                    fs::path(sf.out_dir) / ("sidecar_" + stem.str() + ".json");

                std::vector<SyntheticTask> cell_tasks;
                {
                    std::ofstream out(task_path);
                    for (int e = 0; e < sf.episodes; ++e) {
                        SyntheticSpec espec = cell_spec;
                        espec.seed = derive_seed(cell_spec.seed, "episode",
                                                 static_cast<uint64_t>(e));
                        auto st = generate(espec, part);
                        out << nlohmann::json(st.task).dump() << "\n";
                        cell_tasks.push_back(std::move(st));
                    }
                }
                {
                    nlohmann::json side{{"I", I},
                                        {"S", S},
                                        {"K", K},
                                        {"cell_seed", cell_spec.seed},
                                        {"exact", dist.exact},
                                        {"boundaries", part.boundaries},
                                        {"interval_probs", part.interval_probs}};
                    std::ofstream out(side_path);
                    out << side.dump(2) << "\n";
                }

                if (!sf.chain) continue;

                // chained simulated sweep over this cell
                BackendFlags cell_bf = bf;
                cell_bf.backend = "sim";
                cell_bf.sim_mode = "synthetic";
                cell_bf.sim_i = static_cast<double>(I);
                cell_bf.sim_s = static_cast<double>(S);
                const auto backend = backend_from_flags(cell_bf);

                std::vector<RunRecord> records;
                for (int r = 0; r < sf.runs; ++r) {
                    SamplingParams params;
                    params.n = sf.n;
                    params.temperature = sf.temperature;
                    params.top_p = sf.top_p;
                    params.max_in_flight = sf.max_in_flight;
                    params.seed = sf.seed + static_cast<uint64_t>(r);
                    for (const auto& st : cell_tasks) {
                        auto out = run_vanilla(backend, st.task, params,
                                               "run" + std::to_string(r));
                        records.push_back(std::move(out.record));
                    }
                }
                const auto curve = accuracy_curve(records, {1, sf.n});
                GainCell gc;
                gc.I = I;
                gc.S = S;
                gc.K = K;
                gc.p_single = curve[0].mean_accuracy;
                gc.se_single = curve[0].std_error;
                gc.p_multi = curve[1].mean_accuracy;
                gc.se_multi = curve[1].std_error;
                gain_rows.push_back(gain_row(gc));
            }

    if (sf.chain) {
        std::ofstream out(fs::path(sf.out_dir) / "gain.csv");
        out << gain_csv(gain_rows);
    }
    return kExitOk;
}

struct AnalyzeFlags {
    std::vector<std::string> records_paths;
    std::string out_dir;
    std::string curve_sizes = "";
    bool token_report = false;
};

int cmd_analyze(const AnalyzeFlags& af) {
    if (af.records_paths.empty()) throw config_error("analyze needs --records");
    if (af.out_dir.empty()) throw config_error("analyze needs --out");
    fs::create_directories(af.out_dir);

    std::vector<RunRecord> records;
    std::vector<std::string> methods;  // per record, from the sibling meta.json
    for (const auto& path : af.records_paths) {
        auto batch = load_records_jsonl(path);
        std::string method = "unknown";
        const fs::path meta_path = fs::path(path).parent_path() / "meta.json";
        if (fs::exists(meta_path)) {
            std::ifstream in(meta_path);
            nlohmann::json j;
            in >> j;
            method = j.value("method", "unknown");
        }
        for (auto& rec : batch) {
            records.push_back(std::move(rec));
            methods.push_back(method);
        }
    }
    if (records.empty()) throw config_error("no records loaded");

    std::vector<RunRecord> scored;
    for (const auto& rec : records)
        if (rec.correct_at_full.has_value()) scored.push_back(rec);

    int max_m = 0;
    for (const auto& rec : records)
        for (const auto& e : rec.vote_curve) max_m = std::max(max_m, e.m);

    std::vector<int> sizes = af.curve_sizes.empty() ? default_curve_sizes(max_m)
                                                    : parse_int_list(af.curve_sizes);

    if (!scored.empty()) {
        const auto curve = accuracy_curve(scored, sizes);
        {
            std::ofstream out(fs::path(af.out_dir) / "curve.csv");
            out << curve_csv(curve);
        }
        {
            std::ofstream out(fs::path(af.out_dir) / "gain.txt");
            const auto& first = curve.front();
            const auto& last = curve.back();
            out << "p_single(m=" << first.m << ") = " << first.mean_accuracy << "\n";
            out << "p_multi(m=" << last.m << ") = " << last.mean_accuracy << "\n";
            if (first.mean_accuracy > 0.0) {
                const double eta = relative_gain(first.mean_accuracy, last.mean_accuracy);
                out << "relative_gain = " << eta << " (" << std::lround(eta * 100.0) << "%)\n";
            } else {
                out << "relative_gain = undefined (p_single is zero)\n";
            }
        }
        {
            // one ANOVA group per ensemble size: per-run accuracies
            std::map<std::string, std::map<int, std::pair<long, long>>> by_run;
            for (const auto& rec : scored)
                for (const auto& e : rec.vote_curve)
                    if (std::find(sizes.begin(), sizes.end(), e.m) != sizes.end()) {
                        auto& cell = by_run[rec.run_id][e.m];
                        cell.second += 1;
                        if (e.correct && *e.correct) cell.first += 1;
                    }
            std::vector<std::vector<double>> groups;
            for (int m : sizes) {
                std::vector<double> g;
                for (const auto& [run, acc] : by_run) {
                    const auto it = acc.find(m);
                    if (it != acc.end())
                        g.push_back(static_cast<double>(it->second.first) / it->second.second);
                }
                if (g.size() >= 2) groups.push_back(std::move(g));
            }
            std::ofstream out(fs::path(af.out_dir) / "anova.txt");
            out << "groups: ensemble sizes";
            for (int m : sizes) out << " " << m;
            out << "\n";
            try {
                const auto a = one_way_anova(groups);
                out << "F = " << a.f_stat << "\n";
                out << "df = (" << a.df_between << ", " << a.df_within << ")\n";
                out << "p = " << a.p_value << "\n";
            } catch (const validation_error& e) {
                out << "F undefined: " << e.what() << "\n";
            }
        }
    }

    if (af.token_report) {
        // method, task, mean tokens per call, stddev
        std::map<std::pair<std::string, std::string>, std::vector<double>> tokens;
        for (size_t i = 0; i < records.size(); ++i)
            for (const auto& s : records[i].per_sample)
                tokens[{methods[i], records[i].task_id}].push_back(
                    static_cast<double>(s.prompt_tokens + s.completion_tokens));
        std::ofstream out(fs::path(af.out_dir) / "tokens.csv");
        out << "method,task,mean_tokens,stddev\n";
        out.precision(10);
        for (const auto& [key, vals] : tokens) {
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double ss = 0.0;
            for (double v : vals) ss += (v - mean) * (v - mean);
            const double sd = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) : 0.0;
            out << key.first << "," << key.second << "," << mean << "," << sd << "\n";
        }
    }
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"agentforest: sampling-and-voting ensemble runner"};
    app.require_subcommand(1);
    // config file keys live in a section per subcommand, e.g. [run] n=40;
    // command-line flags take precedence over the file
    app.set_config("--config", "", "key=value config file (flags take precedence)");

    BackendFlags bf;
    RunFlags rf;
    SynthFlags sf;
    AnalyzeFlags af;

    auto* run = app.add_subcommand("run", "run an ensemble over a task file");
    add_backend_flags(run, bf);
    run->add_option("--tasks", rf.tasks_path, "task JSONL file")->required();
    run->add_option("--out", rf.out_dir, "output directory")->required();
    run->add_option("--sidecar", rf.sidecar_path, "synthetic sidecar JSON");
    run->add_option("--n", rf.n, "ensemble size");
    run->add_option("--runs", rf.runs, "independent runs (seeds seed..seed+runs-1)");
    run->add_option("--temperature", rf.temperature, "sampling temperature");
    run->add_option("--top-p", rf.top_p, "nucleus probability");
    run->add_option("--seed", rf.seed, "base run seed");
    run->add_option("--max-in-flight", rf.max_in_flight, "concurrent backend calls");
    run->add_option("--method", rf.method,
                    "vanilla | cot | zs-cot | debate | reflection | stepwise | hierarchical");
    run->add_option("--stages", rf.stages, "hierarchy stages, e.g. 8,32");
    run->add_option("--curve-sizes", rf.curve_sizes, "summary ensemble sizes, e.g. 1,10,20,30,40");
    run->add_flag("--no-method-cap", rf.no_method_cap, "disable the method's ensemble cap");
    run->add_option("--per-step-n", rf.per_step_n, "stepwise per-step ensemble size (0 = n)");

    auto* synth = app.add_subcommand("synth", "generate synthetic difficulty tasks");
    add_backend_flags(synth, bf);
    synth->add_option("--I", sf.i_list, "difficulty values, e.g. 10,100,400");
    synth->add_option("--S", sf.s_list, "step counts");
    synth->add_option("--K", sf.k_list, "interval counts");
    synth->add_option("--seed", sf.seed, "base seed");
    synth->add_option("--episodes", sf.episodes, "tasks generated per cell");
    synth->add_option("--out", sf.out_dir, "output directory")->required();
    synth->add_flag("--chain", sf.chain, "run the simulated agent per cell and emit gain.csv");
    synth->add_option("--n", sf.n, "chained ensemble size");
    synth->add_option("--runs", sf.runs, "chained runs");
    synth->add_option("--temperature", sf.temperature, "chained temperature");
    synth->add_option("--top-p", sf.top_p, "chained top_p");
    synth->add_option("--max-in-flight", sf.max_in_flight, "chained concurrency");

    auto* analyze = app.add_subcommand("analyze", "summarize run records");
    analyze->add_option("--records", af.records_paths, "records.jsonl paths")->required();
    analyze->add_option("--out", af.out_dir, "output directory")->required();
    analyze->add_option("--curve-sizes", af.curve_sizes, "curve ensemble sizes");
    analyze->add_flag("--token-report", af.token_report, "emit per-method token usage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(bf, rf);
        if (synth->parsed()) return cmd_synth(bf, sf);
        if (analyze->parsed()) return cmd_analyze(af);
        return kExitConfig;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const validation_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const backend_error& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace agentforest
