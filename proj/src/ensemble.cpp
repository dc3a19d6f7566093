#include "agentforest/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <map>
#include <thread>

namespace agentforest {

namespace {

bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::optional<Answer> extract_categorical(const std::string& text, const Task& task) {
    std::optional<Answer> last;
    for (size_t pos = 0; (pos = text.find('(', pos)) != std::string::npos; ++pos) {
        const std::string_view rest(text.data() + pos + 1, text.size() - pos - 1);
        const std::string* best = nullptr;
        for (const auto& label : task.option_labels) {
            if (rest.substr(0, label.size()) != label) continue;
            if (!best || label.size() > best->size()) best = &label;
        }
        if (best) last = Answer::of_label(*best);
    }
    return last;
}

std::optional<Answer> extract_numeric(const std::string& text) {
    // last boxed{...} with balanced braces
    std::optional<std::string> payload;
    static const std::string kMarker = "boxed{";
    for (size_t pos = 0; (pos = text.find(kMarker, pos)) != std::string::npos; ++pos) {
        size_t i = pos + kMarker.size();
        int depth = 1;
        std::string content;
        while (i < text.size() && depth > 0) {
            if (text[i] == '{') ++depth;
            if (text[i] == '}') --depth;
            if (depth > 0) content.push_back(text[i]);
            ++i;
        }
        if (depth == 0) payload = std::move(content);
    }
    if (!payload) return std::nullopt;

    std::string cleaned;
    for (char c : *payload)
        if (c != ' ' && c != '$' && c != ',') cleaned.push_back(c);
    if (auto r = Rational::parse(cleaned)) return Answer::of_number(*r);
    // unparseable payloads fall back to exact-string comparison
    return Answer::of_text(*payload);
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

Answer extract_text(const std::string& text) {
    // last fenced code block; the opening fence line may carry a language tag
    std::optional<std::string> block;
    size_t pos = 0;
    while (true) {
        const size_t open = text.find("```", pos);
        if (open == std::string::npos) break;
        size_t body = text.find('\n', open + 3);
        if (body == std::string::npos) break;
        ++body;
        const size_t close = text.find("```", body);
        if (close == std::string::npos) break;
        std::string content = text.substr(body, close - body);
        if (!content.empty() && content.back() == '\n') content.pop_back();
        block = std::move(content);
        pos = close + 3;
    }
    if (block) return Answer::of_text(*block);
    return Answer::of_text(trim(text));
}

}  // namespace

std::optional<Answer> extract_answer(const std::string& raw_text, const Task& task) {
    switch (task.kind) {
        case AnswerKind::categorical: return extract_categorical(raw_text, task);
        case AnswerKind::numeric: return extract_numeric(raw_text);
        case AnswerKind::text: return extract_text(raw_text);
    }
    return std::nullopt;
}

namespace {

std::vector<std::string> bleu_tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else if (is_ascii_punct(c)) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
            out.push_back(std::string(1, c));
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& toks, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
}

}  // namespace

double sentence_bleu(const std::string& candidate, const std::string& reference,
                     const BleuParams& params) {
    params.validate();
    const auto cand = bleu_tokenize(candidate);
    const auto ref = bleu_tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    // orders with no candidate n-grams carry no signal; truncate instead of
    // dividing by zero so short identical strings still score 1
    const int max_order = std::min<int>(params.max_ngram_order, static_cast<int>(cand.size()));
    double log_sum = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        const auto cn = ngram_counts(cand, n);
        const auto rn = ngram_counts(ref, n);
        long total = 0, clipped = 0;
        for (const auto& [gram, count] : cn) {
            total += count;
            const auto it = rn.find(gram);
            if (it != rn.end()) clipped += std::min(count, it->second);
        }
        const double p = clipped > 0 ? static_cast<double>(clipped) / total
                                     : params.smoothing_epsilon / static_cast<double>(total);
        log_sum += std::log(p);
    }
    const double geo = std::exp(log_sum / max_order);
    const double bp = cand.size() >= ref.size()
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref.size()) / cand.size());
    return bp * geo;
}

VoteEngine::VoteEngine(const SampleSet& set, SimilarityKind kind, const BleuParams& bleu) {
    if (set.samples.empty()) throw validation_error("vote: empty sample set");
    n_ = static_cast<int>(set.samples.size());
    samples_.reserve(set.samples.size());
    for (const auto& s : set.samples) samples_.push_back(&s);

    eligible_.assign(set.samples.size(), false);
    for (size_t i = 0; i < set.samples.size(); ++i) eligible_[i] = set.samples[i].answer.has_value();

    sim_.assign(set.samples.size(), std::vector<double>(set.samples.size(), 0.0));
    for (size_t i = 0; i < set.samples.size(); ++i) {
        for (size_t j = i + 1; j < set.samples.size(); ++j) {
            if (!eligible_[i] || !eligible_[j]) continue;
            double s = 0.0;
            const Answer& ai = *set.samples[i].answer;
            const Answer& aj = *set.samples[j].answer;
            if (kind == SimilarityKind::frequency) {
                s = answers_equal(ai, aj) ? 1.0 : 0.0;
            } else {
                // BLEU is asymmetric; Algorithm-style cumulative similarity uses
                // sim(s_i, s_j) with s_i as candidate
                s = sentence_bleu(ai.display(), aj.display(), bleu);
            }
            sim_[i][j] = s;
            if (kind == SimilarityKind::frequency) {
                sim_[j][i] = s;
            } else {
                sim_[j][i] = sentence_bleu(aj.display(), ai.display(), bleu);
            }
        }
    }
}

VoteResult VoteEngine::vote_prefix(int m) const {
    if (m < 1 || m > n_) throw validation_error("vote: prefix size out of range");
    VoteResult r;
    r.scores.reserve(static_cast<size_t>(m));

    int best = -1;
    double best_score = -1.0;
    for (int i = 0; i < m; ++i) {
        double v = 0.0;
        if (eligible_[static_cast<size_t>(i)])
            for (int j = 0; j < m; ++j)
                if (j != i) v += sim_[static_cast<size_t>(i)][static_cast<size_t>(j)];
        r.scores.emplace_back(samples_[static_cast<size_t>(i)]->index, v);
        if (eligible_[static_cast<size_t>(i)]) {
            ++r.n_extracted;
            if (v > best_score) {
                best_score = v;
                best = i;
            }
        }
    }

    if (best < 0) {
        r.tie = false;
        return r;
    }
    r.winner = samples_[static_cast<size_t>(best)]->answer;
    r.winner_index = samples_[static_cast<size_t>(best)]->index;

    // tie iff a second distinct answer value attains the maximum score
    for (int i = 0; i < m; ++i) {
        if (i == best || !eligible_[static_cast<size_t>(i)]) continue;
        if (r.scores[static_cast<size_t>(i)].second == best_score &&
            !answers_equal(*samples_[static_cast<size_t>(i)]->answer, *r.winner)) {
            r.tie = true;
            break;
        }
    }
    return r;
}

VoteResult vote(const SampleSet& samples, SimilarityKind kind, const BleuParams& bleu) {
    VoteEngine engine(samples, kind, bleu);
    return engine.vote_prefix(engine.size());
}

SampleSet sample_phase(const BackendConfig& backend, const Task& task,
                       const SamplingParams& params) {
    params.validate();
    validate_task(task);

    SampleSet set;
    set.task_id = task.id;
    set.params = params;
    set.samples.resize(static_cast<size_t>(params.n));

    std::atomic<int> next{0};
    std::atomic<int> failures{0};

    auto worker = [&] {
        for (int i = next.fetch_add(1); i < params.n; i = next.fetch_add(1)) {
            CompletionRequest req;
            req.prompt = task.prompt;
            req.temperature = params.temperature;
            req.top_p = params.top_p;
            req.sample_index = i;
            req.run_seed = params.seed;
            req.task_id = task.id;
            req.task = &task;

            Sample s;
            s.index = i;
            s.backend_id = backend.backend_id;
            try {
                const auto result = complete(backend, req);
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
                            " calls failed for task '" + task.id + "'");
    return set;
}

RunOutput assemble_run(const SampleSet& set, const Task& task, const std::string& run_id) {
    const auto kind = similarity_for(task.kind);
    VoteEngine engine(set, kind);

    RunOutput out;
    out.record.run_id = run_id;
    out.record.task_id = task.id;
    out.record.params = set.params;
    out.record.per_sample = set.samples;
    // records keep answer summaries plus tokens; raw text survives only as
    // the error note of failed samples
    for (auto& s : out.record.per_sample)
        if (s.answer) s.raw_text.clear();

    long wall = 0;
    for (const auto& s : set.samples) wall += s.latency_ms;
    out.record.wall_ms = wall;

    for (int m = 1; m <= engine.size(); ++m) {
        const auto v = engine.vote_prefix(m);
        CurveEntry e;
        e.m = m;
        e.answer = v.winner;
        if (task.gold)
            e.correct = v.winner.has_value() && answers_equal(*v.winner, *task.gold);
        out.record.vote_curve.push_back(std::move(e));
        if (m == engine.size()) out.vote = v;
    }
    if (task.gold) out.record.correct_at_full = out.record.vote_curve.back().correct;
    return out;
}

RunOutput run_vanilla(const BackendConfig& backend, const Task& task,
                      const SamplingParams& params, const std::string& run_id) {
    const auto set = sample_phase(backend, task, params);
    return assemble_run(set, task, run_id);
}

}  // namespace agentforest
