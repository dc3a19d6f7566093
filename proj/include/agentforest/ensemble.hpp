#pragma once

#include <optional>
#include <string>

#include "agentforest/backends.hpp"
#include "agentforest/core.hpp"

namespace agentforest {

enum class SimilarityKind { frequency, bleu };

// frequency for close-ended kinds, BLEU for open-ended text
inline SimilarityKind similarity_for(AnswerKind kind) {
    return kind == AnswerKind::text ? SimilarityKind::bleu : SimilarityKind::frequency;
}

struct BleuParams {
    int max_ngram_order = 4;
    double smoothing_epsilon = 0.1;

    void validate() const {
        if (max_ngram_order < 1) throw validation_error("bleu: max_ngram_order must be >= 1");
        if (smoothing_epsilon <= 0.0)
            throw validation_error("bleu: smoothing_epsilon must be > 0");
    }
};

// Answer extraction.
//   categorical: last "(L" / "(L)" with L among the task's options (longest
//     label wins at a given position)
//   numeric:     last "boxed{X}" (balanced braces); X parsed as integer,
//     decimal or p/q. A boxed payload that does not parse as a rational is
//     kept as a text-kind answer and compared by exact string equality; we
//     make no attempt at symbolic equivalence.
//   text:        content of the last fenced code block, else the whole
//     trimmed text (never absent)
std::optional<Answer> extract_answer(const std::string& raw_text, const Task& task);

// Sentence BLEU in [0, 1]: whitespace tokens with punctuation split off,
// clipped n-gram precisions up to max_ngram_order (orders truncated to the
// candidate length), floor smoothing epsilon/count for zero matches, brevity
// penalty exp(1 - |ref|/|cand|) for short candidates.
double sentence_bleu(const std::string& candidate, const std::string& reference,
                     const BleuParams& params = {});

// Cumulative-similarity voting: V(s_i) = sum_{j != i} sim(s_i, s_j) over
// samples with extracted answers; winner is the argmax, ties broken by lowest
// sample index. Samples without answers score 0 and never win.
VoteResult vote(const SampleSet& samples, SimilarityKind kind, const BleuParams& bleu = {});

// Precomputed pairwise similarities allowing O(n^2) prefix voting; vote() is
// vote_prefix(n) on a freshly built engine.
class VoteEngine {
public:
    VoteEngine(const SampleSet& samples, SimilarityKind kind, const BleuParams& bleu = {});
    VoteResult vote_prefix(int m) const;
    int size() const { return n_; }

private:
    int n_ = 0;
    std::vector<const Sample*> samples_;
    std::vector<std::vector<double>> sim_;  // pairwise similarity, 0 for unextracted
    std::vector<bool> eligible_;
};

// Fan-out of params.n backend calls, at most params.max_in_flight in flight.
// Results are ordered by sample index regardless of completion order; calls
// that still fail after retries yield answer-absent samples with the error
// text. Throws backend_error only when every call failed.
SampleSet sample_phase(const BackendConfig& backend, const Task& task,
                       const SamplingParams& params);

struct RunOutput {
    VoteResult vote;
    RunRecord record;
};

// sample_phase + vote, with a prefix-vote curve at every m in 1..n and
// correctness against gold when present.
RunOutput run_vanilla(const BackendConfig& backend, const Task& task,
                      const SamplingParams& params, const std::string& run_id);

// prefix curve + record assembly shared by the pipeline runners
RunOutput assemble_run(const SampleSet& set, const Task& task, const std::string& run_id);

}  // namespace agentforest
