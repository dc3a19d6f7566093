#include "agentforest/backends.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "agentforest/rng.hpp"

namespace fs = std::filesystem;

namespace agentforest {

long whitespace_token_count(const std::string& s) {
    long count = 0;
    bool in_token = false;
    for (char c : s) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {

// shortest round-trip representation, stable across platforms
std::string double_repr(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string replay_key(const BackendConfig& inner, const CompletionRequest& req) {
    std::string model;
    if (const auto* h = inner.http()) model = h->model;
    std::string material;
    material += inner.backend_id;
    material += '\x1f';
    material += model;
    material += '\x1f';
    material += req.prompt;
    material += '\x1f';
    material += double_repr(req.temperature);
    material += '\x1f';
    material += double_repr(req.top_p);
    material += '\x1f';
    material += std::to_string(req.sample_index);
    material += '\x1f';
    material += std::to_string(req.run_seed);
    return sha256_hex(material);
}

double SimAgentModel::effective_p(int n_options, double temperature) const {
    const double k = static_cast<double>(n_options);
    const double noise = alpha * std::pow(std::log(1.0 + sim_I), inherent_power) + beta * sim_S;
    double p = base_skill / (base_skill + noise) + prior_weight / k;
    p = std::clamp(p, 1.0 / k, 1.0);
    const double lambda = std::min(temperature, 2.0) / 2.0;
    return (1.0 - lambda) * p + lambda / k;
}

namespace {

std::string render_categorical(const std::string& label) {
    return "The answer is (" + label + ").";
}

std::string render_numeric(const Rational& value) {
    return "The answer is boxed{" + value.str() + "}.";
}

std::string sim_flat(const SimAgentModel& m, const Task& task, Xoshiro256ss& rng) {
    const bool correct = rng.next_double() < m.p_correct;
    switch (task.kind) {
        case AnswerKind::categorical: {
            if (correct) return render_categorical(task.gold->label);
            // wrong answers come from a fixed set of k_wrong non-gold options
            std::vector<std::string> alts;
            for (const auto& l : task.option_labels) {
                if (l == task.gold->label) continue;
                alts.push_back(l);
                if (static_cast<int>(alts.size()) == m.k_wrong) break;
            }
            if (alts.empty()) return render_categorical(task.gold->label);
            return render_categorical(alts[rng.bounded(alts.size())]);
        }
        case AnswerKind::numeric: {
            if (correct) return render_numeric(task.gold->value);
            const long long off = 1 + static_cast<long long>(rng.bounded(m.k_wrong));
            return render_numeric(task.gold->value + Rational::make(off, 1));
        }
        case AnswerKind::text: {
            if (correct) return "```\n" + task.gold->text + "\n```";
            const auto j = rng.bounded(m.k_wrong);
            return "```\nalternative solution " + std::to_string(j + 1) + "\n```";
        }
    }
    throw backend_error("sim: bad task kind");
}

std::string sim_synthetic(const SimAgentModel& m, const Task& task, Xoshiro256ss& rng,
                          double temperature) {
    if (task.kind != AnswerKind::categorical || task.option_labels.empty())
        throw backend_error("sim: synthetic-aware agent needs a categorical task");
    const double p = m.effective_p(static_cast<int>(task.option_labels.size()), temperature);
    if (rng.next_double() < p) return render_categorical(task.gold->label);
    // uniform over the other options
    std::vector<const std::string*> alts;
    for (const auto& l : task.option_labels)
        if (l != task.gold->label) alts.push_back(&l);
    if (alts.empty()) return render_categorical(task.gold->label);
    return render_categorical(*alts[rng.bounded(alts.size())]);
}

std::string sim_stepwise(const SimAgentModel& m, const Task& task, Xoshiro256ss& rng) {
    if (task.gold->kind != AnswerKind::numeric)
        throw backend_error("sim: stepwise agent expects numeric step sub-tasks");
    if (rng.next_double() < m.per_step_p_correct) return render_numeric(task.gold->value);
    const long long off = 1 + static_cast<long long>(rng.bounded(m.step_k_wrong));
    return render_numeric(task.gold->value + Rational::make(off, 1));
}

}  // namespace

std::string sim_respond(const SimAgentModel& model, const Task& task, uint64_t seed) {
    model.validate();
    if (!task.gold) throw backend_error("sim: task '" + task.id + "' has no gold answer");
    Xoshiro256ss rng(seed);
    switch (model.mode) {
        case SimAgentModel::Mode::flat: return sim_flat(model, task, rng);
        case SimAgentModel::Mode::synthetic_aware: return sim_synthetic(model, task, rng, 0.0);
        case SimAgentModel::Mode::stepwise: return sim_stepwise(model, task, rng);
    }
    throw backend_error("sim: bad mode");
}

namespace {

struct ParsedUrl {
    std::string scheme_host_port;  // httplib client target
    std::string base_path;         // path prefix, no trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw config_error("backend: base_url must start with http:// or https://: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    if (path_start == std::string::npos) {
        p.scheme_host_port = url;
    } else {
        p.scheme_host_port = url.substr(0, path_start);
        p.base_path = url.substr(path_start);
        while (!p.base_path.empty() && p.base_path.back() == '/') p.base_path.pop_back();
    }
    return p;
}

CompletionResult http_complete(const BackendConfig& config, const HttpBackend& http,
                               const CompletionRequest& req) {
    http.validate();
    const char* key = std::getenv(http.api_key_env.c_str());
    if (!key || !*key)
        throw backend_error("backend '" + config.backend_id + "': API key env var " +
                            http.api_key_env + " is not set");

    const auto url = parse_base_url(http.base_url);
    nlohmann::json body{{"model", http.model},
                        {"messages", nlohmann::json::array(
                                         {{{"role", "user"}, {"content", req.prompt}}})},
                        {"temperature", req.temperature},
                        {"top_p", req.top_p},
                        {"n", 1}};
    const std::string payload = body.dump();
    const std::string path = url.base_path + "/chat/completions";

    Xoshiro256ss jitter_rng(derive_seed(req.run_seed, req.task_id + "#retry",
                                        static_cast<uint64_t>(req.sample_index)));
    std::string last_error;

    for (int attempt = 0; attempt <= http.max_retries; ++attempt) {
        if (attempt > 0) {
            // exponential backoff with full jitter
            const long cap = http.retry_base_ms << (attempt - 1);
            const long sleep_ms = static_cast<long>(jitter_rng.bounded(
                static_cast<uint64_t>(cap) + 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
        }

        httplib::Client cli(url.scheme_host_port);
        cli.set_connection_timeout(0, http.timeout_ms * 1000);
        cli.set_read_timeout(http.timeout_ms / 1000, (http.timeout_ms % 1000) * 1000);
        cli.set_write_timeout(http.timeout_ms / 1000, (http.timeout_ms % 1000) * 1000);
        cli.set_bearer_token_auth(key);

        const auto t0 = std::chrono::steady_clock::now();
        auto res = cli.Post(path, payload, "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();

        if (!res) {
            last_error = "connection error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 400 && res->status < 500)
            throw backend_error("backend '" + config.backend_id + "': HTTP " +
                                std::to_string(res->status) + ": " + res->body);
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }

        try {
            const auto j = nlohmann::json::parse(res->body);
            CompletionResult out;
            out.raw_text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                out.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
                out.completion_tokens = j["usage"].value("completion_tokens", 0L);
            }
            out.latency_ms = static_cast<long>(elapsed);
            return out;
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("malformed response body: ") + e.what();
            continue;
        }
    }
    throw backend_error("backend '" + config.backend_id + "': giving up after " +
                        std::to_string(http.max_retries + 1) + " attempts; last error: " +
                        last_error);
}

CompletionResult sim_complete(const BackendConfig& config, const SimAgentModel& model,
                              const CompletionRequest& req) {
    if (!req.task) throw backend_error("backend '" + config.backend_id + "': sim needs a task");
    Task task = *req.task;
    task.prompt = req.prompt;  // pipelines may rewrite the prompt
    const uint64_t seed =
        derive_seed(req.run_seed, req.task_id, static_cast<uint64_t>(req.sample_index));
    SimAgentModel m = model;
    CompletionResult out;
    if (m.mode == SimAgentModel::Mode::synthetic_aware) {
        // temperature degradation applies only to the synthetic-aware agent
        if (!task.gold) throw backend_error("sim: task '" + task.id + "' has no gold answer");
        m.validate();
        Xoshiro256ss rng(seed);
        out.raw_text = sim_synthetic(m, task, rng, req.temperature);
    } else {
        out.raw_text = sim_respond(m, task, seed);
    }
    out.prompt_tokens = whitespace_token_count(req.prompt);
    out.completion_tokens = whitespace_token_count(out.raw_text);
    out.latency_ms = 0;
    return out;
}

CompletionResult replay_complete(const BackendConfig& config, const ReplayBackend& replay,
                                 const CompletionRequest& req) {
    if (!replay.inner) throw config_error("backend '" + config.backend_id + "': replay has no inner");
    const auto key = replay_key(*replay.inner, req);
    const fs::path dir = fs::path(replay.cache_dir) / key.substr(0, 2);
    const fs::path file = dir / (key + ".json");

    if (fs::exists(file)) {
        std::ifstream in(file);
        nlohmann::json j;
        in >> j;
        CompletionResult out;
        out.raw_text = j.at("raw_text").get<std::string>();
        out.prompt_tokens = j.at("prompt_tokens").get<long>();
        out.completion_tokens = j.at("completion_tokens").get<long>();
        out.latency_ms = j.at("latency_ms").get<long>();
        return out;
    }

    const auto result = complete(*replay.inner, req);
    fs::create_directories(dir);
    nlohmann::json j{{"raw_text", result.raw_text},
                     {"prompt_tokens", result.prompt_tokens},
                     {"completion_tokens", result.completion_tokens},
                     {"latency_ms", result.latency_ms}};
    // atomic publish: write a temp file, then rename onto the key
    const fs::path tmp = dir / (key + ".tmp" + std::to_string(
                                    std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(tmp);
        out << j.dump();
    }
    fs::rename(tmp, file);
    return result;
}

}  // namespace

CompletionResult complete(const BackendConfig& config, const CompletionRequest& req) {
    if (const auto* h = config.http()) return http_complete(config, *h, req);
    if (const auto* s = config.sim()) return sim_complete(config, *s, req);
    if (const auto* r = config.replay()) return replay_complete(config, *r, req);
    throw config_error("backend '" + config.backend_id + "': no variant configured");
}

}  // namespace agentforest
