#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "agentforest/rng.hpp"
#include "agentforest/synth.hpp"

using namespace agentforest;

namespace {

double pmf_at(const SumDistribution& d, long long v) {
    const long long idx = v - d.offset;
    REQUIRE(d.exact);
    REQUIRE(idx >= 0);
    REQUIRE(idx < static_cast<long long>(d.pmf.size()));
    return d.pmf[static_cast<size_t>(idx)];
}

SyntheticSpec spec_of(long long I, int S, int K, uint64_t seed = 1) {
    SyntheticSpec s;
    s.I = I;
    s.S = S;
    s.K = K;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("product pmf matches hand enumeration at I=1 and I=2") {
    const auto p1 = product_pmf(1);
    CHECK(p1.size() == 3);
    CHECK(p1[1] == doctest::Approx(5.0 / 9.0).epsilon(1e-15));
    CHECK(p1[0] == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
    CHECK(p1[2] == doctest::Approx(2.0 / 9.0).epsilon(1e-15));

    const auto p2 = product_pmf(2);
    CHECK(p2[4] == doctest::Approx(9.0 / 25.0).epsilon(1e-15));
}

TEST_CASE("product pmf is symmetric and sums to one") {
    for (long long I : {1, 2, 5, 20}) {
        const auto p = product_pmf(I);
        double total = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            total += p[i];
            CHECK(p[i] == doctest::Approx(p[p.size() - 1 - i]).epsilon(1e-15));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sum distribution with one term equals the product pmf") {
    const auto d = sum_distribution(spec_of(5, 1, 2));
    const auto p = product_pmf(5);
    REQUIRE(d.exact);
    REQUIRE(d.pmf.size() == p.size());
    for (size_t i = 0; i < p.size(); ++i) CHECK(d.pmf[i] == p[i]);
}

TEST_CASE("two-term convolution at I=1 gives P(0) = 33/81") {
    const auto d = sum_distribution(spec_of(1, 2, 2));
    CHECK(pmf_at(d, 0) == doctest::Approx(33.0 / 81.0).epsilon(1e-15));
    double total = 0.0;
    for (double v : d.pmf) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sum distribution mean is zero by symmetry") {
    for (auto [I, S] : std::vector<std::pair<long long, int>>{{1, 3}, {5, 2}, {10, 4}}) {
        const auto d = sum_distribution(spec_of(I, S, 2));
        REQUIRE(d.exact);
        double mean = 0.0;
        for (size_t i = 0; i < d.pmf.size(); ++i)
            mean += d.pmf[i] * static_cast<double>(d.offset + static_cast<long long>(i));
        CHECK(std::fabs(mean) < 1e-9);
    }
}

TEST_CASE("large settings fall back to seeded Monte Carlo") {
    const auto d = sum_distribution(spec_of(400, 2, 4, 9));
    CHECK_FALSE(d.exact);
    CHECK(d.draws.size() == 1'000'000);
    CHECK(std::is_sorted(d.draws.begin(), d.draws.end()));
    const auto d2 = sum_distribution(spec_of(400, 2, 4, 9));
    CHECK(d.draws == d2.draws);
    // affordable settings stay exact
    CHECK(sum_distribution(spec_of(100, 4, 4)).exact);
    CHECK_FALSE(sum_distribution(spec_of(100, 12, 4)).exact);
}

TEST_CASE("partition boundaries are strictly increasing midpoints") {
    const auto d = sum_distribution(spec_of(10, 2, 4));
    const auto part = partition(d, 4);
    REQUIRE(part.boundaries.size() == 5);
    for (size_t i = 1; i < part.boundaries.size(); ++i)
        CHECK(part.boundaries[i] > part.boundaries[i - 1]);
    double total = 0.0;
    for (double p : part.interval_probs) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    // half-integer boundaries never collide with integer sums
    for (double b : part.boundaries) CHECK(std::fabs(b - std::floor(b) - 0.5) < 1e-12);
}

TEST_CASE("binary partition of a symmetric distribution splits at the zero atom") {
    const auto d = sum_distribution(spec_of(1, 1, 2));
    const auto part = partition(d, 2);
    const double p0 = 5.0 / 9.0;
    CHECK(std::fabs(part.boundaries[1]) == doctest::Approx(0.5));
    CHECK(part.interval_probs[0] >= 0.5 - p0 / 2 - 1e-12);
    CHECK(part.interval_probs[0] <= 0.5 + p0 / 2 + 1e-12);
    CHECK(part.interval_probs[1] >= 0.5 - p0 / 2 - 1e-12);
    CHECK(part.interval_probs[1] <= 0.5 + p0 / 2 + 1e-12);
}

TEST_CASE("partition rejects supports smaller than K") {
    const auto d = sum_distribution(spec_of(1, 1, 2));
    CHECK_THROWS_WITH_AS(partition(d, 10), doctest::Contains("support"), validation_error);
}

TEST_CASE("generated tasks are deterministic and self-consistent") {
    const auto a = generate(spec_of(10, 2, 4, 77));
    const auto b = generate(spec_of(10, 2, 4, 77));
    CHECK(a.task == b.task);
    CHECK(a.a == b.a);
    CHECK(a.correct_interval == b.correct_interval);

    const auto c = generate(spec_of(10, 2, 4, 78));
    CHECK(c.task.id != a.task.id);

    // recomputing the sum relocates the same interval
    const auto d = sum_distribution(spec_of(10, 2, 4));
    const auto part = partition(d, 4);
    for (uint64_t seed = 0; seed < 200; ++seed) {
        auto spec = spec_of(10, 2, 4, seed);
        const auto st = generate(spec, part);
        long long sum = 0;
        for (int i = 0; i < spec.S; ++i)
            sum += st.a[static_cast<size_t>(i)] * st.b[static_cast<size_t>(i)];
        CHECK(locate_interval(static_cast<double>(sum), st.boundaries) == st.correct_interval);
        CHECK(st.task.gold->label == interval_label(st.correct_interval));
        CHECK(st.task.option_labels.size() == 4);
        for (long long v : st.a) {
            CHECK(v >= -10);
            CHECK(v <= 10);
        }
    }
}

TEST_CASE("correct intervals are uniform by chi-square at I=100 S=4 K=4") {
    auto cell = spec_of(100, 4, 4, 5);
    const auto dist = sum_distribution(cell);
    REQUIRE(dist.exact);
    const auto part = partition(dist, 4);
    for (double p : part.interval_probs) CHECK(std::fabs(p - 0.25) < 0.01);

    std::array<long, 4> counts{0, 0, 0, 0};
    const int n = 10000;
    for (int e = 0; e < n; ++e) {
        auto espec = cell;
        espec.seed = derive_seed(cell.seed, "episode", static_cast<uint64_t>(e));
        counts[static_cast<size_t>(generate(espec, part).correct_interval)] += 1;
    }
    double chi2 = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double expected = n * part.interval_probs[static_cast<size_t>(k)];
        chi2 += (counts[static_cast<size_t>(k)] - expected) * (counts[static_cast<size_t>(k)] - expected) / expected;
    }
    CHECK(chi2 < 11.345);  // chi-square(3) critical value at alpha = 0.01
}

TEST_CASE("uniform guessing scores the prior probability") {
    auto cell = spec_of(10, 2, 4, 3);
    const auto dist = sum_distribution(cell);
    const auto part = partition(dist, 4);
    Xoshiro256ss rng(2024);
    const int n = 10000;
    long hits = 0;
    for (int e = 0; e < n; ++e) {
        auto espec = cell;
        espec.seed = derive_seed(cell.seed, "episode", static_cast<uint64_t>(e));
        const auto st = generate(espec, part);
        hits += static_cast<int>(rng.bounded(4)) == st.correct_interval ? 1 : 0;
    }
    const double acc = static_cast<double>(hits) / n;
    CHECK(std::fabs(acc - 0.25) < 4.0 * std::sqrt(0.25 * 0.75 / n) + 0.01);
}

TEST_CASE("gain rows flag undefined cells instead of dividing by zero") {
    GainCell ok;
    ok.I = 10;
    ok.S = 4;
    ok.K = 4;
    ok.p_single = 0.35;
    ok.p_multi = 0.59;
    ok.se_single = 0.01;
    ok.se_multi = 0.01;
    const auto row = gain_row(ok);
    CHECK(row.defined);
    CHECK(std::lround(row.eta * 100) == 69);
    CHECK(row.se > 0.0);

    GainCell zero = ok;
    zero.p_single = 0.0;
    CHECK_FALSE(gain_row(zero).defined);

    GainCell flat = ok;
    flat.p_multi = flat.p_single;
    CHECK(gain_row(flat).eta == 0.0);

    const auto csv = gain_csv({row, gain_row(zero)});
    CHECK(csv.find("I,S,K,p_single,p_multi,eta,se_eta") == 0);
    CHECK(csv.find("undefined") != std::string::npos);
}

TEST_CASE("monte carlo partition stays close to the exact one") {
    // exact oracle at a small setting vs an independent empirical check
    auto cell = spec_of(10, 2, 4, 11);
    const auto dist = sum_distribution(cell);
    const auto part = partition(dist, 4);
    Xoshiro256ss rng(555);
    const int m = 200000;
    std::array<long, 4> counts{0, 0, 0, 0};
    for (int i = 0; i < m; ++i) {
        long long sum = 0;
        for (int t = 0; t < 2; ++t) sum += rng.uniform_int(-10, 10) * rng.uniform_int(-10, 10);
        counts[static_cast<size_t>(locate_interval(static_cast<double>(sum), part.boundaries))]++;
    }
    for (int k = 0; k < 4; ++k) {
        const double frac = static_cast<double>(counts[static_cast<size_t>(k)]) / m;
        CHECK(std::fabs(frac - part.interval_probs[static_cast<size_t>(k)]) <
              4.0 * std::sqrt(0.25 / m));
    }
}
