#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agentforest/core.hpp"

namespace agentforest {

struct SyntheticSpec {
    long long I = 1;  // coefficient range (inherent difficulty)
    int S = 1;        // number of summation terms (steps)
    int K = 2;        // number of intervals (prior probability 1/K)
    uint64_t seed = 0;

    void validate() const {
        if (I < 1) throw validation_error("synthetic spec: I must be >= 1");
        if (S < 1) throw validation_error("synthetic spec: S must be >= 1");
        if (K < 2) throw validation_error("synthetic spec: K must be >= 2");
    }
};

// Distribution of sum(a_i * b_i): exact dense pmf when affordable, otherwise
// one million seeded Monte Carlo draws.
struct SumDistribution {
    bool exact = true;
    // exact mode: pmf[i] is the probability of value offset + i
    long long offset = 0;
    std::vector<double> pmf;
    // monte-carlo mode: sorted draws
    std::vector<long long> draws;

    long long support_min() const;
    long long support_max() const;
};

// Exact pmf of X*Y with X, Y independent uniform on the integers [-I, I].
// Returned vector covers [-I^2, I^2]; entry i is P(X*Y = i - I^2).
std::vector<double> product_pmf(long long I);

SumDistribution sum_distribution(const SyntheticSpec& spec);

struct Partition {
    std::vector<double> boundaries;      // K+1 strictly increasing reals
    std::vector<double> interval_probs;  // achieved probabilities, one per interval
};

// Equal-probability partition into K half-open intervals [b_k, b_k+1), last
// closed. Boundaries sit at midpoints between adjacent support atoms, so no
// integer sum ever collides with a boundary. Throws when the support has
// fewer than K atoms.
Partition partition(const SumDistribution& dist, int K);

struct SyntheticTask {
    SyntheticSpec spec;
    std::vector<long long> a, b;
    std::vector<double> boundaries;
    int correct_interval = 0;  // in [0, K)
    std::vector<double> interval_probs;
    Task task;  // rendered categorical task with labels Δ1..ΔK
};

// Draws coefficients with the spec seed and renders the prompt. The one-arg
// form computes the distribution oracle itself; the two-arg form reuses a
// precomputed partition so sweeps can share one oracle across episodes.
SyntheticTask generate(const SyntheticSpec& spec);
SyntheticTask generate(const SyntheticSpec& spec, const Partition& part);

std::string interval_label(int index);  // 0 -> "Δ1"

// index of the interval containing value (last interval closed on the right)
int locate_interval(double value, const std::vector<double>& boundaries);

struct GainCell {
    long long I = 0;
    int S = 0;
    int K = 0;
    double p_single = 0.0;
    double p_multi = 0.0;
    double se_single = 0.0;
    double se_multi = 0.0;
};

struct GainRow {
    GainCell cell;
    bool defined = false;  // false when p_single == 0
    double eta = 0.0;
    double se = 0.0;
};

GainRow gain_row(const GainCell& cell);
std::string gain_csv(const std::vector<GainRow>& rows);

}  // namespace agentforest
