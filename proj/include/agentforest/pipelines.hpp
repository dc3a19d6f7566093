#pragma once

#include <functional>
#include <string>
#include <vector>

#include "agentforest/ensemble.hpp"
#include "agentforest/synth.hpp"

namespace agentforest {

// A black-box enhancement method: a deterministic prompt transform plus an
// optional multi-call driver that replaces the single backend call. The
// internals of debate/reflection style methods are not modeled here; they
// plug in through the driver hook.
struct ComposedMethod {
    std::string method_id = "identity";
    // deterministic given (task, sample seed)
    std::function<Task(const Task&, uint64_t sample_seed)> transform;
    std::function<CompletionResult(const BackendConfig&, const Task&, const CompletionRequest&)>
        driver;
    int ensemble_cap = 0;  // 0 = uncapped; "debate" defaults to 10
};

// Built-in registry: identity, cot, zs-cot ("Let's think step by step."
// suffix), debate (identity transform, cap 10), reflection (identity).
ComposedMethod make_method(const std::string& method_id);

// Every sample is one full execution of the composed method; voting and the
// record are identical to the vanilla path. The effective ensemble size is
// min(params.n, cap) when the method carries a cap.
RunOutput run_composed(const ComposedMethod& method, const BackendConfig& backend,
                       const Task& task, const SamplingParams& params, const std::string& run_id);

// Ordered step prompts with optional context-dependent gold values for
// simulated runs: step_gold(t, previous voted value) returns the sub-task
// gold for step t. "{context}" in a step prompt is replaced by the resolved
// results so far; without the placeholder the context block is prepended.
struct StepPlan {
    std::vector<std::string> steps;
    AnswerKind step_kind = AnswerKind::numeric;
    std::function<std::optional<Answer>(int, const std::optional<Answer>&)> step_gold;
};

struct StepwiseOutput {
    std::vector<VoteResult> step_votes;
    std::vector<Answer> resolved;  // voted result per completed step
    VoteResult final_vote;
    RunRecord record;
};

// Votes each step with the accumulated context injected, feeding each winner
// into the next step. A step whose vote yields no winner aborts with an error
// naming the step. per_step_n = 0 uses params.n samples per step.
StepwiseOutput run_stepwise(const BackendConfig& backend, const Task& task, const StepPlan& plan,
                            const SamplingParams& params, const std::string& run_id,
                            int per_step_n = 0);

struct HierarchySpec {
    std::vector<int> stages;                    // e.g. {8, 32}; ascending, divisible
    std::vector<BackendConfig> stage_backends;  // one per stage, or a single shared one

    void validate() const;
    const BackendConfig& backend_for(size_t stage) const;
};

struct StageReport {
    VoteResult vote;
    std::vector<std::pair<int, int>> candidates;  // [lo, hi) ranges of fine intervals
    int winner_range = -1;                        // index into candidates
};

struct HierarchicalOutput {
    std::vector<StageReport> stage_reports;
    VoteResult final_vote;  // winner label in the full K-interval space
    RunRecord record;
};

// Coarse-to-fine interval classification: stage t votes over its candidate
// groups, the next stage restricts to the children of the winning group.
// Candidate groups are unions of consecutive fine intervals, so they inherit
// equal probability from the fine partition. The task's K must equal the
// last stage.
HierarchicalOutput run_hierarchical(const HierarchySpec& spec, const SyntheticTask& task,
                                    const SamplingParams& params, const std::string& run_id);

// synthetic-task pipelines: one product-and-accumulate step per term
StepPlan make_accumulation_plan(const SyntheticTask& task);
// end-to-end numeric variant of the synthetic task (gold = the full sum),
// the flat baseline for step-wise comparisons
Task sum_task(const SyntheticTask& task);

}  // namespace agentforest
