#include "agentforest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agentforest/rng.hpp"

namespace agentforest {

long long SumDistribution::support_min() const {
    if (exact) {
        for (size_t i = 0; i < pmf.size(); ++i)
            if (pmf[i] > 0.0) return offset + static_cast<long long>(i);
        return offset;
    }
    return draws.front();
}

long long SumDistribution::support_max() const {
    if (exact) {
        for (size_t i = pmf.size(); i-- > 0;)
            if (pmf[i] > 0.0) return offset + static_cast<long long>(i);
        return offset;
    }
    return draws.back();
}

std::vector<double> product_pmf(long long I) {
    if (I < 1) throw validation_error("product pmf: I must be >= 1");
    const long long isq = I * I;
    std::vector<double> counts(static_cast<size_t>(2 * isq + 1), 0.0);
    for (long long x = -I; x <= I; ++x)
        for (long long y = -I; y <= I; ++y) counts[static_cast<size_t>(x * y + isq)] += 1.0;
    const double total = static_cast<double>((2 * I + 1) * (2 * I + 1));
    for (auto& c : counts) c /= total;
    return counts;
}

namespace {

constexpr double kMaxSpecWorkUnits = 1e8;  // (2*S*I^2 + 1) * S
constexpr double kMaxSupport = 2e7;        // dense pmf array length
constexpr double kMaxConvOps = 5e9;        // sparse multiply-add budget

constexpr size_t kMonteCarloDraws = 1'000'000;

}  // namespace

SumDistribution sum_distribution(const SyntheticSpec& spec) {
    spec.validate();
    SumDistribution dist;
    const long long isq = spec.I * spec.I;

    const double support = 2.0 * spec.S * static_cast<double>(isq) + 1.0;
    bool affordable = support * spec.S <= kMaxSpecWorkUnits && support <= kMaxSupport;
    std::vector<double> prod;
    std::vector<std::pair<size_t, double>> nz;
    if (affordable) {
        // the product pmf is sparse (only ~30% of [-I^2, I^2] are products
        // of two integers in range), so the convolution costs support * nnz
        prod = product_pmf(spec.I);
        for (size_t i = 0; i < prod.size(); ++i)
            if (prod[i] > 0.0) nz.emplace_back(i, prod[i]);
        double conv_ops = 0.0;
        for (int t = 1; t < spec.S; ++t)
            conv_ops += (2.0 * t * static_cast<double>(isq) + 1.0) * static_cast<double>(nz.size());
        affordable = conv_ops <= kMaxConvOps;
    }

    if (affordable) {
        dist.exact = true;
        dist.offset = -static_cast<long long>(spec.S) * isq;
        std::vector<double> cur = prod;
        for (int t = 1; t < spec.S; ++t) {
            std::vector<double> next(cur.size() + prod.size() - 1, 0.0);
            for (size_t i = 0; i < cur.size(); ++i) {
                const double ci = cur[i];
                if (ci == 0.0) continue;
                for (const auto& [j, pj] : nz) next[i + j] += ci * pj;
            }
            cur = std::move(next);
        }
        dist.pmf = std::move(cur);
        return dist;
    }

    dist.exact = false;
    dist.draws.resize(kMonteCarloDraws);
    Xoshiro256ss rng(derive_seed(spec.seed, "sum-distribution-mc", 0));
    for (auto& d : dist.draws) {
        long long sum = 0;
        for (int i = 0; i < spec.S; ++i)
            sum += rng.uniform_int(-spec.I, spec.I) * rng.uniform_int(-spec.I, spec.I);
        d = sum;
    }
    std::sort(dist.draws.begin(), dist.draws.end());
    return dist;
}

namespace {

// common atom/probability view over both distribution modes
void atoms_of(const SumDistribution& dist, std::vector<long long>& atoms,
              std::vector<double>& probs) {
    atoms.clear();
    probs.clear();
    if (dist.exact) {
        for (size_t i = 0; i < dist.pmf.size(); ++i)
            if (dist.pmf[i] > 0.0) {
                atoms.push_back(dist.offset + static_cast<long long>(i));
                probs.push_back(dist.pmf[i]);
            }
    } else {
        const double m = static_cast<double>(dist.draws.size());
        size_t i = 0;
        while (i < dist.draws.size()) {
            size_t j = i;
            while (j < dist.draws.size() && dist.draws[j] == dist.draws[i]) ++j;
            atoms.push_back(dist.draws[i]);
            probs.push_back(static_cast<double>(j - i) / m);
            i = j;
        }
    }
}

}  // namespace

Partition partition(const SumDistribution& dist, int K) {
    if (K < 2) throw validation_error("partition: K must be >= 2");
    std::vector<long long> atoms;
    std::vector<double> probs;
    atoms_of(dist, atoms, probs);
    const int n = static_cast<int>(atoms.size());
    if (n < K)
        throw validation_error("partition: support has " + std::to_string(n) +
                               " atoms, fewer than K=" + std::to_string(K));

    std::vector<double> cdf(probs.size());
    double run = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        run += probs[i];
        cdf[i] = run;
    }

    // splits[k] = support index of the first atom of interval k+1
    std::vector<int> splits(static_cast<size_t>(K) - 1);
    int prev_split = 0;
    for (int k = 1; k < K; ++k) {
        const double target = static_cast<double>(k) / K;
        int v = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
        v = std::min(v, n - 1);
        // split either before or after atom v, whichever mass lands closer
        const double after = std::fabs(cdf[static_cast<size_t>(v)] - target);
        const double before = std::fabs((v > 0 ? cdf[static_cast<size_t>(v) - 1] : 0.0) - target);
        int split = before <= after ? v : v + 1;
        split = std::max(split, prev_split + 1);           // at least one atom per interval
        split = std::min(split, n - (K - k));              // leave atoms for later intervals
        splits[static_cast<size_t>(k) - 1] = split;
        prev_split = split;
    }

    Partition part;
    part.boundaries.resize(static_cast<size_t>(K) + 1);
    part.boundaries.front() = static_cast<double>(atoms.front()) - 0.5;
    part.boundaries.back() = static_cast<double>(atoms.back()) + 0.5;
    for (int k = 1; k < K; ++k) {
        const int s = splits[static_cast<size_t>(k) - 1];
        part.boundaries[static_cast<size_t>(k)] =
            0.5 * (static_cast<double>(atoms[static_cast<size_t>(s) - 1]) +
                   static_cast<double>(atoms[static_cast<size_t>(s)]));
    }

    part.interval_probs.assign(static_cast<size_t>(K), 0.0);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k < K - 1 && i >= splits[static_cast<size_t>(k)]) ++k;
        part.interval_probs[static_cast<size_t>(k)] += probs[static_cast<size_t>(i)];
    }
    return part;
}

std::string interval_label(int index) { return "\xce\x94" + std::to_string(index + 1); }

int locate_interval(double value, const std::vector<double>& boundaries) {
    const int K = static_cast<int>(boundaries.size()) - 1;
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), value);
    int k = static_cast<int>(it - boundaries.begin()) - 1;
    return std::clamp(k, 0, K - 1);
}

namespace {

std::string format_boundary(double b) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << b;
    return os.str();
}

std::string render_prompt(const SyntheticSpec& spec, const std::vector<long long>& a,
                          const std::vector<long long>& b,
                          const std::vector<double>& boundaries) {
    std::ostringstream os;
    os << "Compute x = ";
    for (int i = 0; i < spec.S; ++i) {
        if (i) os << " + ";
        os << "(" << a[static_cast<size_t>(i)] << ")*(" << b[static_cast<size_t>(i)] << ")";
    }
    os << ".\nThe result space is split into " << spec.K << " intervals of equal probability:\n";
    for (int k = 0; k < spec.K; ++k) {
        os << interval_label(k) << " = [" << format_boundary(boundaries[static_cast<size_t>(k)])
           << ", " << format_boundary(boundaries[static_cast<size_t>(k) + 1])
           << (k == spec.K - 1 ? "]" : ")") << "\n";
    }
    os << "Which interval contains x? Answer with the interval label in parentheses, e.g. \"("
       << interval_label(0) << ")\".";
    return os.str();
}

}  // namespace

SyntheticTask generate(const SyntheticSpec& spec) {
    const auto dist = sum_distribution(spec);
    return generate(spec, partition(dist, spec.K));
}

SyntheticTask generate(const SyntheticSpec& spec, const Partition& part) {
    spec.validate();
    if (static_cast<int>(part.boundaries.size()) != spec.K + 1)
        throw validation_error("generate: partition does not match spec.K");

    SyntheticTask st;
    st.spec = spec;
    Xoshiro256ss rng(spec.seed);
    st.a.resize(static_cast<size_t>(spec.S));
    st.b.resize(static_cast<size_t>(spec.S));
    long long sum = 0;
    for (int i = 0; i < spec.S; ++i) {
        st.a[static_cast<size_t>(i)] = rng.uniform_int(-spec.I, spec.I);
        st.b[static_cast<size_t>(i)] = rng.uniform_int(-spec.I, spec.I);
        sum += st.a[static_cast<size_t>(i)] * st.b[static_cast<size_t>(i)];
    }
    st.boundaries = part.boundaries;
    st.interval_probs = part.interval_probs;
    st.correct_interval = locate_interval(static_cast<double>(sum), st.boundaries);

    Task t;
    std::ostringstream id;
    id << "synth-I" << spec.I << "-S" << spec.S << "-K" << spec.K << "-s" << spec.seed;
    t.id = id.str();
    t.kind = AnswerKind::categorical;
    for (int k = 0; k < spec.K; ++k) t.option_labels.push_back(interval_label(k));
    t.gold = Answer::of_label(interval_label(st.correct_interval));
    t.prompt = render_prompt(spec, st.a, st.b, st.boundaries);
    st.task = std::move(t);
    return st;
}

GainRow gain_row(const GainCell& cell) {
    GainRow row;
    row.cell = cell;
    if (cell.p_single <= 0.0) {
        row.defined = false;
        return row;
    }
    row.defined = true;
    row.eta = (cell.p_multi - cell.p_single) / cell.p_single;
    // delta-method propagation of the two standard errors
    const double d_m = cell.se_multi / cell.p_single;
    const double d_s = cell.p_multi * cell.se_single / (cell.p_single * cell.p_single);
    row.se = std::sqrt(d_m * d_m + d_s * d_s);
    return row;
}

std::string gain_csv(const std::vector<GainRow>& rows) {
    std::ostringstream os;
    os << "I,S,K,p_single,p_multi,eta,se_eta\n";
    os.precision(10);
    for (const auto& r : rows) {
        os << r.cell.I << "," << r.cell.S << "," << r.cell.K << "," << r.cell.p_single << ","
           << r.cell.p_multi << ",";
        if (r.defined)
            os << r.eta << "," << r.se;
        else
            os << "undefined,undefined";
        os << "\n";
    }
    return os.str();
}

}  // namespace agentforest
