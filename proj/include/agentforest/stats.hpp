#pragma once

#include <vector>

#include "agentforest/core.hpp"

namespace agentforest {

struct CurvePoint {
    int m = 0;
    double mean_accuracy = 0.0;
    double std_error = 0.0;
    int n_runs = 0;
};

struct AnovaResult {
    double f_stat = 0.0;
    int df_between = 0;
    int df_within = 0;
    double p_value = 1.0;
};

// Mean accuracy and standard error per requested ensemble size. Records are
// grouped by run_id and averaged over tasks within a run first; the standard
// error is the between-run sample stddev / sqrt(n_runs).
std::vector<CurvePoint> accuracy_curve(const std::vector<RunRecord>& records,
                                       const std::vector<int>& sizes);

// (p_multi - p_single) / p_single; throws validation_error when p_single <= 0.
double relative_gain(double p_single, double p_multi);

// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

// Standard one-way ANOVA. Throws validation_error for < 2 groups, groups with
// < 2 observations, or zero within-group variance with equal means (F undefined).
// p-values below 1e-12 are floored at 1e-12.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

// Exact probability that a plurality vote of n samples is correct under the
// flat model: each sample correct w.p. q, otherwise uniform over k_wrong
// wrong answers. A t-way tie including the correct answer credits 1/t.
// Enumerates compositions; requires n <= 12.
double plurality_oracle(double q, int k_wrong, int n);

}  // namespace agentforest
