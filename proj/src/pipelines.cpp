#include "agentforest/pipelines.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "agentforest/rng.hpp"

namespace agentforest {

ComposedMethod make_method(const std::string& method_id) {
    ComposedMethod m;
    m.method_id = method_id;
    if (method_id == "identity" || method_id == "vanilla") {
        return m;
    }
    if (method_id == "cot" || method_id == "zs-cot") {
        m.transform = [](const Task& t, uint64_t) {
            Task out = t;
            out.prompt += "\nLet's think step by step.";
            return out;
        };
        return m;
    }
    if (method_id == "debate") {
        m.ensemble_cap = 10;
        return m;
    }
    if (method_id == "reflection") {
        return m;
    }
    throw config_error("unknown method: " + method_id);
}

namespace {

// shared bounded fan-out; identical scheduling to sample_phase so identity
// transforms reproduce vanilla records bit for bit
SampleSet fan_out(const BackendConfig& backend, const SamplingParams& params,
                  const std::string& task_id,
                  const std::function<std::pair<Task, CompletionRequest>(int)>& make_call,
                  const std::function<CompletionResult(const BackendConfig&, const Task&,
                                                       const CompletionRequest&)>& driver) {
    SampleSet set;
    set.task_id = task_id;
    set.params = params;
    set.samples.resize(static_cast<size_t>(params.n));

    std::atomic<int> next{0};
    std::atomic<int> failures{0};

    auto worker = [&] {
        for (int i = next.fetch_add(1); i < params.n; i = next.fetch_add(1)) {
            auto [task, req] = make_call(i);
            req.task = &task;
            Sample s;
            s.index = i;
            s.backend_id = backend.backend_id;
            try {
                const auto result = driver ? driver(backend, task, req) : complete(backend, req);
                s.raw_text = result.raw_text;
                s.prompt_tokens = result.prompt_tokens;
                s.completion_tokens = result.completion_tokens;
                s.latency_ms = result.latency_ms;
                s.answer = extract_answer(s.raw_text, task);
            } catch (const std::exception& e) {
                s.raw_text = std::string("[error] ") + e.what();
                failures.fetch_add(1);
            }
            set.samples[static_cast<size_t>(i)] = std::move(s);
        }
    };

    const int workers = std::min(params.max_in_flight, params.n);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    if (failures.load() == params.n)
        throw backend_error("sample phase: all " + std::to_string(params.n) +
                            " calls failed for task '" + task_id + "'");
    return set;
}

}  // namespace

RunOutput run_composed(const ComposedMethod& method, const BackendConfig& backend,
                       const Task& task, const SamplingParams& params,
                       const std::string& run_id) {
    params.validate();
    validate_task(task);

    SamplingParams effective = params;
    if (method.ensemble_cap > 0) effective.n = std::min(params.n, method.ensemble_cap);

    auto make_call = [&](int i) {
        const uint64_t seed = derive_seed(effective.seed, task.id, static_cast<uint64_t>(i));
        Task transformed = method.transform ? method.transform(task, seed) : task;
        CompletionRequest req;
        req.prompt = transformed.prompt;
        req.temperature = effective.temperature;
        req.top_p = effective.top_p;
        req.sample_index = i;
        req.run_seed = effective.seed;
        req.task_id = task.id;
        return std::make_pair(std::move(transformed), std::move(req));
    };

    const auto set = fan_out(backend, effective, task.id, make_call, method.driver);
    return assemble_run(set, task, run_id);
}

namespace {

std::string render_context(const std::vector<Answer>& resolved) {
    std::ostringstream os;
    for (size_t i = 0; i < resolved.size(); ++i)
        os << "Step " << (i + 1) << " result: " << resolved[i].display() << "\n";
    return os.str();
}

std::string inject_context(const std::string& step_prompt, const std::string& context) {
    const auto pos = step_prompt.find("{context}");
    if (pos == std::string::npos) {
        if (context.empty()) return step_prompt;
        return context + step_prompt;
    }
    std::string out = step_prompt;
    out.replace(pos, 9, context);
    return out;
}

}  // namespace

StepwiseOutput run_stepwise(const BackendConfig& backend, const Task& task, const StepPlan& plan,
                            const SamplingParams& params, const std::string& run_id,
                            int per_step_n) {
    params.validate();
    if (plan.steps.empty()) throw validation_error("stepwise: plan has no steps");

    SamplingParams step_params = params;
    if (per_step_n > 0) step_params.n = per_step_n;

    StepwiseOutput out;
    std::optional<Answer> prev;
    SampleSet last_set;
    Task last_sub;

    for (size_t t = 0; t < plan.steps.size(); ++t) {
        Task sub;
        sub.id = task.id + "#step" + std::to_string(t + 1);
        sub.kind = plan.step_kind;
        sub.prompt = inject_context(plan.steps[t], render_context(out.resolved));
        if (plan.step_gold) sub.gold = plan.step_gold(static_cast<int>(t), prev);

        const auto set = sample_phase(backend, sub, step_params);
        const auto v = vote(set, similarity_for(sub.kind));
        if (!v.winner)
            throw backend_error("stepwise: step " + std::to_string(t + 1) +
                                " vote produced no winner for task '" + task.id + "'");
        out.step_votes.push_back(v);
        out.resolved.push_back(*v.winner);
        prev = *v.winner;
        last_set = set;
        last_sub = sub;
    }

    auto assembled = assemble_run(last_set, last_sub, run_id);
    out.final_vote = assembled.vote;
    out.record = std::move(assembled.record);
    out.record.task_id = task.id;
    if (task.gold) {
        const bool ok = out.final_vote.winner && answers_equal(*out.final_vote.winner, *task.gold);
        out.record.correct_at_full = ok;
        if (!out.record.vote_curve.empty()) out.record.vote_curve.back().correct = ok;
    }
    return out;
}

void HierarchySpec::validate() const {
    if (stages.empty()) throw validation_error("hierarchy: stages must be non-empty");
    for (size_t i = 0; i < stages.size(); ++i) {
        if (stages[i] < 2) throw validation_error("hierarchy: every stage K must be >= 2");
        if (i > 0 && (stages[i] < stages[i - 1] || stages[i] % stages[i - 1] != 0))
            throw validation_error(
                "hierarchy: each later stage K must be a multiple of the earlier one");
    }
    if (!stage_backends.empty() && stage_backends.size() != 1 &&
        stage_backends.size() != stages.size())
        throw validation_error("hierarchy: need one backend, or one per stage");
}

const BackendConfig& HierarchySpec::backend_for(size_t stage) const {
    if (stage_backends.empty()) throw validation_error("hierarchy: no backends configured");
    if (stage_backends.size() == 1) return stage_backends.front();
    return stage_backends.at(stage);
}

namespace {

std::string range_label(int lo, int hi) {
    if (hi - lo == 1) return interval_label(lo);
    return interval_label(lo) + "-" + interval_label(hi - 1);
}

std::string format_bound(double b) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << b;
    return os.str();
}

Task make_stage_task(const SyntheticTask& st, const std::vector<std::pair<int, int>>& ranges,
                     size_t stage) {
    Task t;
    t.id = st.task.id + "#stage" + std::to_string(stage + 1);
    t.kind = AnswerKind::categorical;

    std::ostringstream prompt;
    prompt << "Compute x = ";
    for (int i = 0; i < st.spec.S; ++i) {
        if (i) prompt << " + ";
        prompt << "(" << st.a[static_cast<size_t>(i)] << ")*(" << st.b[static_cast<size_t>(i)]
               << ")";
    }
    prompt << ".\nCandidate intervals:\n";
    int gold_range = -1;
    for (size_t r = 0; r < ranges.size(); ++r) {
        const auto [lo, hi] = ranges[r];
        const std::string label = range_label(lo, hi);
        t.option_labels.push_back(label);
        prompt << label << " = [" << format_bound(st.boundaries[static_cast<size_t>(lo)]) << ", "
               << format_bound(st.boundaries[static_cast<size_t>(hi)])
               << (r + 1 == ranges.size() ? "]" : ")") << "\n";
        if (lo <= st.correct_interval && st.correct_interval < hi)
            gold_range = static_cast<int>(r);
    }
    prompt << "Which candidate interval contains x? Answer with the label in parentheses.";
    t.prompt = prompt.str();

    // when an earlier stage eliminated the true interval no candidate is
    // right; any label keeps the simulator well-defined and the final answer
    // is wrong regardless
    t.gold = Answer::of_label(t.option_labels[static_cast<size_t>(
        gold_range >= 0 ? gold_range : 0)]);
    return t;
}

}  // namespace

HierarchicalOutput run_hierarchical(const HierarchySpec& spec, const SyntheticTask& task,
                                    const SamplingParams& params, const std::string& run_id) {
    spec.validate();
    params.validate();
    const int fine_k = task.spec.K;
    if (spec.stages.back() != fine_k)
        throw validation_error("hierarchy: last stage K " + std::to_string(spec.stages.back()) +
                               " does not match the task's K " + std::to_string(fine_k));

    HierarchicalOutput out;

    // degenerate single stage at the task's own K is exactly the vanilla path
    if (spec.stages.size() == 1) {
        auto run = run_vanilla(spec.backend_for(0), task.task, params, run_id);
        StageReport report;
        report.vote = run.vote;
        for (int c = 0; c < fine_k; ++c) report.candidates.emplace_back(c, c + 1);
        if (run.vote.winner_index) {
            for (size_t r = 0; r < report.candidates.size(); ++r)
                if (task.task.option_labels[r] == run.vote.winner->label)
                    report.winner_range = static_cast<int>(r);
        }
        out.stage_reports.push_back(std::move(report));
        out.final_vote = run.vote;
        out.record = std::move(run.record);
        return out;
    }

    // stage 1 candidates: K1 equal groups of fine intervals
    std::vector<std::pair<int, int>> ranges;
    {
        const int span = fine_k / spec.stages.front();
        for (int g = 0; g < spec.stages.front(); ++g)
            ranges.emplace_back(g * span, (g + 1) * span);
    }

    SampleSet last_set;
    Task last_sub;
    for (size_t stage = 0; stage < spec.stages.size(); ++stage) {
        const Task sub = make_stage_task(task, ranges, stage);
        const auto set = sample_phase(spec.backend_for(stage), sub, params);
        const auto v = vote(set, SimilarityKind::frequency);
        if (!v.winner)
            throw backend_error("hierarchy: stage " + std::to_string(stage + 1) +
                                " vote produced no winner for task '" + task.task.id + "'");

        StageReport report;
        report.vote = v;
        report.candidates = ranges;
        for (size_t r = 0; r < ranges.size(); ++r)
            if (sub.option_labels[r] == v.winner->label) report.winner_range = static_cast<int>(r);
        out.stage_reports.push_back(report);

        last_set = set;
        last_sub = sub;

        if (stage + 1 < spec.stages.size()) {
            const auto [lo, hi] = ranges[static_cast<size_t>(report.winner_range)];
            const int child_span = fine_k / spec.stages[stage + 1];
            std::vector<std::pair<int, int>> children;
            for (int c = lo; c < hi; c += child_span) children.emplace_back(c, c + child_span);
            ranges = std::move(children);
        }
    }

    auto assembled = assemble_run(last_set, last_sub, run_id);
    out.final_vote = assembled.vote;
    out.record = std::move(assembled.record);
    out.record.task_id = task.task.id;
    if (task.task.gold) {
        const bool ok =
            out.final_vote.winner && answers_equal(*out.final_vote.winner, *task.task.gold);
        out.record.correct_at_full = ok;
        if (!out.record.vote_curve.empty()) out.record.vote_curve.back().correct = ok;
    }
    return out;
}

StepPlan make_accumulation_plan(const SyntheticTask& task) {
    StepPlan plan;
    plan.step_kind = AnswerKind::numeric;
    for (int t = 0; t < task.spec.S; ++t) {
        std::ostringstream os;
        os << "{context}Add (" << task.a[static_cast<size_t>(t)] << ")*("
           << task.b[static_cast<size_t>(t)]
           << ") to the previous result (0 if none) and report the new total as boxed{X}.";
        plan.steps.push_back(os.str());
    }
    const auto a = task.a;
    const auto b = task.b;
    plan.step_gold = [a, b](int t, const std::optional<Answer>& prev) -> std::optional<Answer> {
        const long long term = a[static_cast<size_t>(t)] * b[static_cast<size_t>(t)];
        Rational base = Rational::make(0, 1);
        if (prev && prev->kind == AnswerKind::numeric) base = prev->value;
        return Answer::of_number(base + Rational::make(term, 1));
    };
    return plan;
}

Task sum_task(const SyntheticTask& task) {
    Task t;
    t.id = task.task.id + "#sum";
    t.kind = AnswerKind::numeric;
    std::ostringstream os;
    os << "Compute x = ";
    long long total = 0;
    for (int i = 0; i < task.spec.S; ++i) {
        if (i) os << " + ";
        os << "(" << task.a[static_cast<size_t>(i)] << ")*(" << task.b[static_cast<size_t>(i)]
           << ")";
        total += task.a[static_cast<size_t>(i)] * task.b[static_cast<size_t>(i)];
    }
    os << ". Report the result as boxed{X}.";
    t.prompt = os.str();
    t.gold = Answer::of_number(Rational::make(total, 1));
    return t;
}

}  // namespace agentforest
