#include "agentforest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace agentforest {

std::vector<CurvePoint> accuracy_curve(const std::vector<RunRecord>& records,
                                       const std::vector<int>& sizes) {
    if (records.empty()) throw validation_error("curve: no records");

    // run_id -> per-size accumulated (correct count, task count)
    std::map<std::string, std::map<int, std::pair<long, long>>> by_run;
    for (const auto& rec : records) {
        auto& acc = by_run[rec.run_id];
        for (int m : sizes) {
            const CurveEntry* found = nullptr;
            for (const auto& e : rec.vote_curve)
                if (e.m == m) found = &e;
            if (!found)
                throw validation_error("curve: record " + rec.run_id + "/" + rec.task_id +
                                       " lacks ensemble size " + std::to_string(m));
            auto& cell = acc[m];
            cell.second += 1;
            if (found->correct && *found->correct) cell.first += 1;
        }
    }

    std::vector<CurvePoint> out;
    for (int m : sizes) {
        std::vector<double> run_accs;
        for (const auto& [run, acc] : by_run) {
            const auto& cell = acc.at(m);
            run_accs.push_back(static_cast<double>(cell.first) / static_cast<double>(cell.second));
        }
        CurvePoint p;
        p.m = m;
        p.n_runs = static_cast<int>(run_accs.size());
        double mean = 0.0;
        for (double a : run_accs) mean += a;
        mean /= run_accs.size();
        p.mean_accuracy = mean;
        if (run_accs.size() > 1) {
            double ss = 0.0;
            for (double a : run_accs) ss += (a - mean) * (a - mean);
            const double sd = std::sqrt(ss / (run_accs.size() - 1));
            p.std_error = sd / std::sqrt(static_cast<double>(run_accs.size()));
        }
        out.push_back(p);
    }
    return out;
}

double relative_gain(double p_single, double p_multi) {
    if (p_single <= 0.0) throw validation_error("relative gain undefined: p_single is zero");
    return (p_multi - p_single) / p_single;
}

namespace {

// Lentz's method for the continued fraction of the incomplete beta function.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-14;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lnbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lnbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw validation_error("anova: need at least 2 groups");
    long total_n = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw validation_error("anova: each group needs at least 2 observations");
        for (double v : g) {
            grand_sum += v;
            ++total_n;
        }
    }
    const double grand_mean = grand_sum / static_cast<double>(total_n);

    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double mean = 0.0;
        for (double v : g) mean += v;
        mean /= g.size();
        ssb += static_cast<double>(g.size()) * (mean - grand_mean) * (mean - grand_mean);
        for (double v : g) ssw += (v - mean) * (v - mean);
    }

    AnovaResult r;
    r.df_between = static_cast<int>(groups.size()) - 1;
    r.df_within = static_cast<int>(total_n) - static_cast<int>(groups.size());

    const double msb = ssb / r.df_between;
    const double msw = ssw / r.df_within;
    if (msw == 0.0) {
        if (msb == 0.0)
            throw validation_error("anova: F undefined (zero within-group variance, equal means)");
        r.f_stat = std::numeric_limits<double>::infinity();
        r.p_value = 1e-12;
        return r;
    }
    r.f_stat = msb / msw;

    const double d1 = r.df_between;
    const double d2 = r.df_within;
    const double x = d1 * r.f_stat / (d1 * r.f_stat + d2);
    double p = 1.0 - incomplete_beta(d1 / 2.0, d2 / 2.0, x);
    r.p_value = std::max(p, 1e-12);
    return r;
}

double plurality_oracle(double q, int k_wrong, int n) {
    if (n > 12) throw validation_error("plurality oracle: n > 12 not enumerable");
    if (n < 1 || k_wrong < 1) throw validation_error("plurality oracle: bad arguments");

    // exact factorials up to 12! fit a double with no rounding
    double fact[13];
    fact[0] = 1.0;
    for (int i = 1; i <= 12; ++i) fact[i] = fact[i - 1] * i;

    const double pw = (1.0 - q) / k_wrong;
    double total = 0.0;
    std::vector<int> counts(static_cast<size_t>(k_wrong) + 1, 0);

    // counts[0] = correct answer; counts[1..k] = wrong answers
    auto rec = [&](auto&& self, int idx, int left) -> void {
        if (idx == k_wrong) {
            counts[static_cast<size_t>(k_wrong)] = left;
            int maxc = 0;
            for (int c : counts) maxc = std::max(maxc, c);
            if (counts[0] < maxc) return;
            int ties = 0;
            for (int c : counts) ties += c == maxc ? 1 : 0;

            const int wrong_total = n - counts[0];
            if (counts[0] > 0 && q == 0.0) return;
            if (wrong_total > 0 && q == 1.0) return;

            double coeff = fact[n];
            for (int c : counts) coeff /= fact[c];
            double p = coeff;
            if (counts[0] > 0) p *= std::pow(q, counts[0]);
            if (wrong_total > 0) p *= std::pow(pw, wrong_total);
            total += p / ties;
            return;
        }
        for (int c = 0; c <= left; ++c) {
            counts[static_cast<size_t>(idx)] = c;
            self(self, idx + 1, left - c);
        }
    };
    rec(rec, 0, n);
    return total;
}

}  // namespace agentforest
