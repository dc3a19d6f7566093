#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>

#include "agentforest/core.hpp"

namespace agentforest {

struct HttpBackend {
    std::string base_url;  // e.g. http://localhost:8080/v1
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    long timeout_ms = 30000;
    int max_retries = 2;
    long retry_base_ms = 500;  // exponential backoff base, full jitter

    void validate() const {
        if (timeout_ms <= 0) throw validation_error("backend: timeout_ms must be > 0");
        if (max_retries < 0) throw validation_error("backend: max_retries must be >= 0");
    }
};

// Deterministic stand-in agent. All randomness comes from the per-sample seed.
struct SimAgentModel {
    enum class Mode { flat, synthetic_aware, stepwise };
    Mode mode = Mode::flat;

    // flat: correct with probability p_correct, otherwise uniform over k_wrong
    // fixed wrong alternatives
    double p_correct = 1.0;
    int k_wrong = 1;

    // synthetic_aware: skill derived from the difficulty knobs of the interval
    // task family. With the defaults below the effective correctness is
    //   p_raw = base_skill / (base_skill + alpha*ln(1+I)^inherent_power + beta*S)
    //   p_eff = clamp(p_raw + prior_weight/K, 1/K, 1)      K = #options
    //   p_T   = (1 - min(T,2)/2) * p_eff + (min(T,2)/2) / K
    // prior_weight and inherent_power default to the neutral values 0 and 1;
    // sweeps raise them to shape prior-probability and difficulty sensitivity.
    double base_skill = 1.0;
    double alpha = 1.0;
    double beta = 0.25;
    double prior_weight = 0.0;
    double inherent_power = 1.0;
    double sim_I = 1.0;  // task-family difficulty the agent was configured for
    double sim_S = 1.0;

    // stepwise: per-step correctness on step sub-tasks; wrong answers are the
    // gold value plus a uniform offset in 1..step_k_wrong
    double per_step_p_correct = 1.0;
    int step_k_wrong = 3;

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob(p_correct)) throw validation_error("sim model: p_correct must be in [0,1]");
        if (!prob(per_step_p_correct))
            throw validation_error("sim model: per_step_p_correct must be in [0,1]");
        if (k_wrong < 1) throw validation_error("sim model: k_wrong must be >= 1");
        if (step_k_wrong < 1) throw validation_error("sim model: step_k_wrong must be >= 1");
        if (base_skill <= 0.0) throw validation_error("sim model: base_skill must be > 0");
    }

    // effective correctness probability for a K-way task at temperature T
    double effective_p(int n_options, double temperature) const;
};

struct BackendConfig;

struct ReplayBackend {
    std::string cache_dir;
    std::shared_ptr<BackendConfig> inner;
};

struct BackendConfig {
    std::string backend_id;
    std::variant<HttpBackend, SimAgentModel, ReplayBackend> variant;

    const HttpBackend* http() const { return std::get_if<HttpBackend>(&variant); }
    const SimAgentModel* sim() const { return std::get_if<SimAgentModel>(&variant); }
    const ReplayBackend* replay() const { return std::get_if<ReplayBackend>(&variant); }
};

struct CompletionRequest {
    std::string prompt;
    double temperature = 1.0;
    double top_p = 1.0;
    int sample_index = 0;
    uint64_t run_seed = 0;
    std::string task_id;
    const Task* task = nullptr;  // required by simulated backends
};

struct CompletionResult {
    std::string raw_text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long latency_ms = 0;
};

// One backend call. HTTP errors retry with exponential backoff (base
// retry_base_ms, factor 2, full jitter) except 4xx, which surface
// immediately; throws backend_error after max_retries.
CompletionResult complete(const BackendConfig& config, const CompletionRequest& req);

// Deterministic simulated response; requires task.gold.
std::string sim_respond(const SimAgentModel& model, const Task& task, uint64_t seed);

// Content address of a request under a given inner backend: SHA-256 over
// (inner_id, model, prompt, temperature, top_p, sample_index, run_seed).
std::string replay_key(const BackendConfig& inner, const CompletionRequest& req);

std::string sha256_hex(const std::string& data);

long whitespace_token_count(const std::string& s);

}  // namespace agentforest
