#include "agentforest/core.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace agentforest {

std::string to_string(AnswerKind k) {
    switch (k) {
        case AnswerKind::categorical: return "categorical";
        case AnswerKind::numeric: return "numeric";
        case AnswerKind::text: return "text";
    }
    return "text";
}

AnswerKind answer_kind_from_string(const std::string& s) {
    if (s == "categorical") return AnswerKind::categorical;
    if (s == "numeric") return AnswerKind::numeric;
    if (s == "text") return AnswerKind::text;
    throw validation_error("unknown answer kind: " + s);
}

std::string Answer::display() const {
    switch (kind) {
        case AnswerKind::categorical: return label;
        case AnswerKind::numeric: return value.str();
        case AnswerKind::text: return text;
    }
    return {};
}

void validate_task(const Task& task) {
    if (task.id.empty()) throw validation_error("task: id must be non-empty");
    if (task.kind == AnswerKind::categorical) {
        if (task.option_labels.empty())
            throw validation_error("task '" + task.id + "': options required for categorical kind");
        std::set<std::string> seen;
        for (const auto& l : task.option_labels)
            if (!seen.insert(l).second)
                throw validation_error("task '" + task.id + "': duplicate option label '" + l + "'");
    }
    if (task.gold && task.gold->kind != task.kind)
        throw validation_error("task '" + task.id + "': gold kind mismatch");
    if (task.gold && task.kind == AnswerKind::categorical) {
        bool found = false;
        for (const auto& l : task.option_labels) found = found || l == task.gold->label;
        if (!found)
            throw validation_error("task '" + task.id + "': gold label not among options");
    }
}

Answer parse_gold(const std::string& s, AnswerKind kind) {
    switch (kind) {
        case AnswerKind::categorical: return Answer::of_label(s);
        case AnswerKind::numeric: {
            auto r = Rational::parse(s);
            if (!r) throw validation_error("gold '" + s + "' is not an integer, decimal or p/q");
            return Answer::of_number(*r);
        }
        case AnswerKind::text: return Answer::of_text(s);
    }
    throw validation_error("bad answer kind");
}

void to_json(nlohmann::json& j, const Answer& a) {
    j = nlohmann::json{{"kind", to_string(a.kind)}, {"value", a.display()}};
}

void from_json(const nlohmann::json& j, Answer& a) {
    const auto kind = answer_kind_from_string(j.at("kind").get<std::string>());
    a = parse_gold(j.at("value").get<std::string>(), kind);
}

void to_json(nlohmann::json& j, const Task& t) {
    j = nlohmann::json{{"id", t.id}, {"prompt", t.prompt}, {"kind", to_string(t.kind)}};
    if (!t.option_labels.empty()) j["options"] = t.option_labels;
    if (t.gold) j["gold"] = t.gold->display();
    if (!t.steps.empty()) j["steps"] = t.steps;
    if (!t.stages.empty()) j["stages"] = t.stages;
}

void from_json(const nlohmann::json& j, Task& t) {
    t = Task{};
    t.id = j.at("id").get<std::string>();
    t.prompt = j.at("prompt").get<std::string>();
    t.kind = answer_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("options")) t.option_labels = j.at("options").get<std::vector<std::string>>();
    if (j.contains("gold")) t.gold = parse_gold(j.at("gold").get<std::string>(), t.kind);
    if (j.contains("steps")) t.steps = j.at("steps").get<std::vector<std::string>>();
    if (j.contains("stages")) t.stages = j.at("stages").get<std::vector<int>>();
}

void to_json(nlohmann::json& j, const SamplingParams& p) {
    j = nlohmann::json{{"n", p.n},
                       {"temperature", p.temperature},
                       {"top_p", p.top_p},
                       {"max_in_flight", p.max_in_flight},
                       {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, SamplingParams& p) {
    p.n = j.at("n").get<int>();
    p.temperature = j.at("temperature").get<double>();
    p.top_p = j.at("top_p").get<double>();
    p.max_in_flight = j.at("max_in_flight").get<int>();
    p.seed = j.at("seed").get<uint64_t>();
}

void to_json(nlohmann::json& j, const Sample& s) {
    j = nlohmann::json{{"index", s.index},
                       {"prompt_tokens", s.prompt_tokens},
                       {"completion_tokens", s.completion_tokens},
                       {"latency_ms", s.latency_ms},
                       {"backend_id", s.backend_id}};
    if (s.answer) j["answer"] = *s.answer;
    if (!s.raw_text.empty()) j["raw_text"] = s.raw_text;
}

void from_json(const nlohmann::json& j, Sample& s) {
    s = Sample{};
    s.index = j.at("index").get<int>();
    s.prompt_tokens = j.at("prompt_tokens").get<long>();
    s.completion_tokens = j.at("completion_tokens").get<long>();
    s.latency_ms = j.at("latency_ms").get<long>();
    s.backend_id = j.at("backend_id").get<std::string>();
    if (j.contains("answer")) s.answer = j.at("answer").get<Answer>();
    s.raw_text = j.value("raw_text", std::string{});
}

void to_json(nlohmann::json& j, const CurveEntry& e) {
    j = nlohmann::json{{"m", e.m}};
    if (e.answer) j["answer"] = *e.answer;
    if (e.correct) j["correct"] = *e.correct;
}

void from_json(const nlohmann::json& j, CurveEntry& e) {
    e = CurveEntry{};
    e.m = j.at("m").get<int>();
    if (j.contains("answer")) e.answer = j.at("answer").get<Answer>();
    if (j.contains("correct")) e.correct = j.at("correct").get<bool>();
}

void to_json(nlohmann::json& j, const RunRecord& r) {
    j = nlohmann::json{{"run_id", r.run_id},
                       {"task_id", r.task_id},
                       {"params", r.params},
                       {"per_sample", r.per_sample},
                       {"vote_curve", r.vote_curve},
                       {"wall_ms", r.wall_ms}};
    if (r.correct_at_full) j["correct_at_full"] = *r.correct_at_full;
}

void from_json(const nlohmann::json& j, RunRecord& r) {
    r = RunRecord{};
    r.run_id = j.at("run_id").get<std::string>();
    r.task_id = j.at("task_id").get<std::string>();
    r.params = j.at("params").get<SamplingParams>();
    r.per_sample = j.at("per_sample").get<std::vector<Sample>>();
    r.vote_curve = j.at("vote_curve").get<std::vector<CurveEntry>>();
    if (j.contains("correct_at_full")) r.correct_at_full = j.at("correct_at_full").get<bool>();
    r.wall_ms = j.at("wall_ms").get<long>();
}

namespace {

template <typename T>
std::vector<T> load_jsonl(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw config_error(std::string("cannot open ") + what + " file: " + path);
    std::vector<T> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<T>());
        } catch (const std::exception& e) {
            throw config_error(path + ":" + std::to_string(lineno) + ": malformed " + what +
                               " record: " + e.what());
        }
    }
    return out;
}

}  // namespace

std::vector<Task> load_tasks_jsonl(const std::string& path) {
    auto tasks = load_jsonl<Task>(path, "task");
    std::set<std::string> ids;
    for (const auto& t : tasks) {
        validate_task(t);
        if (!ids.insert(t.id).second)
            throw validation_error("task file " + path + ": duplicate task id '" + t.id + "'");
    }
    return tasks;
}

std::vector<RunRecord> load_records_jsonl(const std::string& path) {
    return load_jsonl<RunRecord>(path, "run");
}

}  // namespace agentforest
