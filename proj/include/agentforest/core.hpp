#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentforest/rational.hpp"

namespace agentforest {

struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct backend_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AnswerKind { categorical, numeric, text };

std::string to_string(AnswerKind k);
AnswerKind answer_kind_from_string(const std::string& s);

// One extracted answer. Exactly one payload is meaningful, selected by kind.
// A sample's answer kind may differ from the task kind: unparseable numeric
// payloads fall back to text-kind answers compared by exact string equality
// (see extract_answer).
struct Answer {
    AnswerKind kind = AnswerKind::text;
    std::string label;   // categorical
    Rational value;      // numeric
    std::string text;    // text

    static Answer of_label(std::string l) {
        Answer a;
        a.kind = AnswerKind::categorical;
        a.label = std::move(l);
        return a;
    }
    static Answer of_number(Rational r) {
        Answer a;
        a.kind = AnswerKind::numeric;
        a.value = r;
        return a;
    }
    static Answer of_text(std::string t) {
        Answer a;
        a.kind = AnswerKind::text;
        a.text = std::move(t);
        return a;
    }

    // payload rendered as a plain string ("B", "3/2", code text)
    std::string display() const;

    friend bool operator==(const Answer& a, const Answer& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case AnswerKind::categorical: return a.label == b.label;
            case AnswerKind::numeric: return a.value == b.value;
            case AnswerKind::text: return a.text == b.text;
        }
        return false;
    }
    friend bool operator!=(const Answer& a, const Answer& b) { return !(a == b); }
};

struct Task {
    std::string id;
    std::string prompt;
    AnswerKind kind = AnswerKind::categorical;
    std::vector<std::string> option_labels;  // required iff kind == categorical
    std::optional<Answer> gold;
    std::vector<std::string> steps;  // optional explicit step plan
    std::vector<int> stages;         // optional hierarchy stages

    friend bool operator==(const Task&, const Task&) = default;
};

// Throws validation_error naming the violated invariant.
void validate_task(const Task& task);

struct SamplingParams {
    int n = 1;
    double temperature = 1.0;
    double top_p = 1.0;
    int max_in_flight = 8;
    uint64_t seed = 0;

    void validate() const {
        if (n < 1) throw validation_error("params: n must be >= 1");
        if (max_in_flight < 1) throw validation_error("params: max_in_flight must be >= 1");
        if (!(top_p > 0.0 && top_p <= 1.0)) throw validation_error("params: top_p must be in (0, 1]");
        if (temperature < 0.0) throw validation_error("params: temperature must be >= 0");
    }

    friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

struct Sample {
    int index = 0;
    std::string raw_text;
    std::optional<Answer> answer;  // absent iff extraction failed
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long latency_ms = 0;
    std::string backend_id;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleSet {
    std::string task_id;
    std::vector<Sample> samples;  // ordered by index, no gaps
    SamplingParams params;

    void validate() const {
        if (samples.size() > static_cast<size_t>(params.n))
            throw validation_error("sample set: more samples than params.n");
        for (size_t i = 0; i < samples.size(); ++i)
            if (samples[i].index != static_cast<int>(i))
                throw validation_error("sample set: indices must be 0..len-1 without gaps");
    }

    friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

struct VoteResult {
    std::optional<Answer> winner;
    std::optional<int> winner_index;
    std::vector<std::pair<int, double>> scores;  // (sample_index, cumulative similarity)
    bool tie = false;
    int n_extracted = 0;

    friend bool operator==(const VoteResult&, const VoteResult&) = default;
};

struct CurveEntry {
    int m = 0;
    std::optional<Answer> answer;
    std::optional<bool> correct;

    friend bool operator==(const CurveEntry&, const CurveEntry&) = default;
};

struct RunRecord {
    std::string run_id;
    std::string task_id;
    SamplingParams params;
    std::vector<Sample> per_sample;
    std::vector<CurveEntry> vote_curve;  // strictly increasing m, max m <= params.n
    std::optional<bool> correct_at_full;
    // deterministic "logical" wall time: sum of per-sample latencies; real
    // timestamps live in meta.json so record files stay byte-reproducible
    long wall_ms = 0;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// kind-aware equality used for vote similarity and gold scoring
inline bool answers_equal(const Answer& a, const Answer& b) { return a == b; }

// ---- JSON (nlohmann) ----
// Task files: gold is a plain string interpreted by the task kind.
// Records: answers are {"kind": ..., "value": ...} objects.
void to_json(nlohmann::json& j, const Answer& a);
void from_json(const nlohmann::json& j, Answer& a);
void to_json(nlohmann::json& j, const Task& t);
void from_json(const nlohmann::json& j, Task& t);
void to_json(nlohmann::json& j, const SamplingParams& p);
void from_json(const nlohmann::json& j, SamplingParams& p);
void to_json(nlohmann::json& j, const Sample& s);
void from_json(const nlohmann::json& j, Sample& s);
void to_json(nlohmann::json& j, const CurveEntry& e);
void from_json(const nlohmann::json& j, CurveEntry& e);
void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

std::vector<Task> load_tasks_jsonl(const std::string& path);
std::vector<RunRecord> load_records_jsonl(const std::string& path);

// parse a gold string by kind ("B" / "1/2" / verbatim text)
Answer parse_gold(const std::string& s, AnswerKind kind);

}  // namespace agentforest
