#include "selmerlab/chains.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace selmerlab::chains {

namespace {

using boost::multiprecision::cpp_int;

// 2^e as an exact rational, e of either sign.
Rational pw2(long long e) {
    cpp_int one = 1;
    if (e >= 0) return Rational(one << e, 1);
    return Rational(1, one << (-e));
}

double pw2d(long long e) { return std::ldexp(1.0, static_cast<int>(e)); }

// Truncated Euler-type products; 2^-64 is far below double resolution.
double prod_one_minus_half_powers(int upto = 64) {
    double p = 1.0;
    for (int i = 1; i <= upto; ++i) p *= 1.0 - std::ldexp(1.0, -i);
    return p;
}

double prod_one_plus_half_powers_inv(int upto = 64) {
    double p = 1.0;
    for (int i = 1; i <= upto; ++i) p /= 1.0 + std::ldexp(1.0, -i);
    return p;
}

int parity(int v) { return ((v % 2) + 2) % 2; }

}  // namespace

std::string State::to_string() const {
    return "(" + std::to_string(m) + "," + std::to_string(m1) + "," + std::to_string(m2) + ")";
}

void ChainSpec::validate() const {
    std::size_t want = type == ChainType::A ? 0 : (type == ChainType::B ? 1 : 2);
    if (t.size() != want) throw std::invalid_argument("chain: wrong number of hole parameters");
    for (int ti : t) {
        if (ti == kMinusInfinity) throw std::invalid_argument("chain: t = -infinity has no chain");
        if (parity(ti) != parity(r)) throw std::invalid_argument("chain: t_i parity mismatch");
    }
    if (type == ChainType::C && t[0] + t[1] > 0)
        throw std::invalid_argument("chain: type C needs t1 + t2 <= 0");
    if (truncation < 2) throw std::invalid_argument("chain: truncation too small");
}

bool ChainSpec::admissible(const State &st) const {
    if (st.m < 0 || parity(st.m) != parity(r)) return false;
    switch (type) {
        case ChainType::A:
            return st.m1 == 0 && st.m2 == 0;
        case ChainType::B: {
            int t1 = t[0];
            return st.m2 == 0 && st.m1 >= std::max(t1, 0) && st.m1 <= st.m &&
                   st.m <= 2 * st.m1 - t1;
        }
        case ChainType::C: {
            int t1 = t[0], t2 = t[1];
            if (st.m1 < 0 || st.m2 < 0) return false;
            if (st.m1 - st.m2 < t1 || st.m2 - st.m1 < t2) return false;
            int T = -(t1 + t2) / 2;
            int A = st.m2 - st.m1 - t2;
            int B = st.m - st.m1 - st.m2;
            return B >= 0 && B <= std::min(A, 2 * T - A) && parity(B) == parity(A);
        }
    }
    return false;
}

std::vector<State> ChainSpec::states() const {
    validate();
    std::vector<State> out;
    for (int m = 0; m <= truncation; ++m) {
        if (parity(m) != parity(r)) continue;
        switch (type) {
            case ChainType::A:
                out.push_back({m, 0, 0});
                break;
            case ChainType::B:
                for (int m1 = 0; m1 <= m; ++m1)
                    if (admissible({m, m1, 0})) out.push_back({m, m1, 0});
                break;
            case ChainType::C:
                for (int m1 = 0; m1 <= m; ++m1)
                    for (int m2 = 0; m2 <= m; ++m2)
                        if (admissible({m, m1, m2})) out.push_back({m, m1, m2});
                break;
        }
    }
    return out;
}

double Distribution::total() const {
    double s = 0;
    for (const auto &[st, v] : p) s += v;
    return s;
}

double Distribution::tv_distance(const Distribution &other) const {
    double s = 0;
    for (const auto &[st, v] : p) s += std::abs(v - other[st]);
    for (const auto &[st, v] : other.p)
        if (!p.count(st)) s += std::abs(v);
    return s / 2;
}

Rational transition_prob(const ChainSpec &spec, const State &from, const State &to) {
    if (!spec.admissible(from) || !spec.admissible(to)) return 0;
    const int dm = to.m - from.m, d1 = to.m1 - from.m1, d2 = to.m2 - from.m2;
    if (dm != 0 && dm != 2 && dm != -2) return 0;
    if (d1 < -1 || d1 > 1 || d2 < -1 || d2 > 1) return 0;

    switch (spec.type) {
        case ChainType::A: {
            Rational x = pw2(-from.m);
            if (dm == 2) return x * x / 2;
            if (dm == 0) return x * (3 - 5 * x / 2);
            return (1 - x) * (1 - 2 * x);
        }
        case ChainType::B: {
            Rational tau = pw2(spec.t[0]);
            Rational x = pw2(from.m1 - from.m), y = pw2(-from.m1);
            if (d1 == 1) {
                if (dm == -2) return 0;
                if (dm == 0) return tau * (1 - x) * y * y / 2;
                return tau * x * y * y / 2;
            }
            if (d1 == 0) {
                if (dm == -2) return y * (1 - x) * (1 - 2 * x);
                if (dm == 0)
                    return y * (tau - 3 * tau * y / 2 + 3 * x - 5 * x * x / 2 + tau * x * y / 2);
                return x * y * (x - tau * y) / 2;
            }
            // d1 == -1
            if (dm == -2) return (1 - x) * (1 - y);
            if (dm == 0) return (x - tau * y) * (1 - y);
            return 0;
        }
        case ChainType::C: {
            Rational tau1 = pw2(spec.t[0]), tau2 = pw2(spec.t[1]);
            Rational y1 = pw2(-from.m1), y2 = pw2(-from.m2), z = pw2(-from.m);
            if (dm == 2) {
                if (d1 == -1 || d2 == -1) return 0;
                if (d1 == 0 && d2 == 1) return tau2 * y2 * (z - tau1 * y1 * y1) / (2 * y1);
                if (d1 == 0 && d2 == 0)
                    return (z - tau1 * y1 * y1) * (z - tau2 * y2 * y2) / (2 * y1 * y2);
                if (d1 == 1 && d2 == 1) return tau1 * tau2 * y1 * y2 / 2;
                // d1 == 1, d2 == 0
                return tau1 * y1 * (z - tau2 * y2 * y2) / (2 * y2);
            }
            if (dm == -2) {
                if (d1 == 1 || d2 == 1) return 0;
                if (d1 == -1 && d2 == 0) return (1 - y1) * (y2 - z / y1);
                if (d1 == -1 && d2 == -1) return (1 - y1) * (1 - y2);
                if (d1 == 0 && d2 == 0)
                    return (y1 * y2 - z) * (y1 * y2 - 2 * z) / (y1 * y2);
                // d1 == 0, d2 == -1
                return (1 - y2) * (y1 - z / y2);
            }
            // dm == 0
            if (d1 == -1 && d2 == 0) return (1 - y1) * (z - tau1 * y1 * y1) / y1;
            if (d1 == 0 && d2 == 1) return tau2 * y2 * (y1 * y2 - z) / (2 * y1);
            if (d1 == 0 && d2 == 0)
                return tau1 * y1 + tau2 * y2 - 3 * (tau1 * y1 * y1 + tau2 * y2 * y2) / 2 +
                       z * (tau1 * y1 * y1 + tau2 * y2 * y2 - 5 * z) / (2 * y1 * y2) + 3 * z;
            if (d1 == 0 && d2 == -1) return (1 - y2) * (z - tau2 * y2 * y2) / y2;
            if (d1 == 1 && d2 == 0) return tau1 * y1 * (y1 * y2 - z) / (2 * y2);
            return 0;
        }
    }
    return 0;
}

std::vector<std::pair<State, Rational>> transition_row(const ChainSpec &spec, const State &from) {
    std::vector<std::pair<State, Rational>> row;
    for (int dm : {-2, 0, 2})
        for (int d1 : {-1, 0, 1})
            for (int d2 : {-1, 0, 1}) {
                State to{from.m + dm, from.m1 + d1, from.m2 + d2};
                if (spec.type != ChainType::C && d2 != 0) continue;
                if (spec.type == ChainType::A && d1 != 0) continue;
                Rational p = transition_prob(spec, from, to);
                if (p != 0) row.emplace_back(to, p);
            }
    return row;
}

PowerIterationResult equilibrium_power(const ChainSpec &spec, double tol, std::size_t max_iter,
                                       std::optional<State> start) {
    spec.validate();
    std::vector<State> states = spec.states();
    if (states.empty()) throw std::invalid_argument("empty state space");
    std::map<State, std::size_t> index;
    for (std::size_t i = 0; i < states.size(); ++i) index[states[i]] = i;

    // Precompute rows as (target index, prob); targets past the truncation leak.
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(states.size());
    for (std::size_t j = 0; j < states.size(); ++j)
        for (const auto &[to, p] : transition_row(spec, states[j])) {
            auto it = index.find(to);
            if (it != index.end()) rows[j].emplace_back(it->second, static_cast<double>(p));
        }

    std::vector<double> x(states.size(), 0.0);
    State st0 = start.value_or(states.front());
    auto it0 = index.find(st0);
    if (it0 == index.end()) throw std::invalid_argument("start state not in space");
    x[it0->second] = 1.0;

    PowerIterationResult res;
    std::vector<double> nx(states.size());
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        std::fill(nx.begin(), nx.end(), 0.0);
        for (std::size_t j = 0; j < states.size(); ++j)
            for (const auto &[i, p] : rows[j]) nx[i] += p * x[j];
        // TV distance between renormalized iterates.
        double mx = 0, mn = 0;
        for (double v : x) mx += v;
        for (double v : nx) mn += v;
        double tv = 0;
        for (std::size_t i = 0; i < states.size(); ++i) tv += std::abs(x[i] / mx - nx[i] / mn);
        tv /= 2;
        x.swap(nx);
        res.iterations = iter;
        res.achieved_tv = tv;
        if (tv < tol) {
            res.converged = true;
            break;
        }
    }
    double mass = 0;
    for (double v : x) mass += v;
    res.leakage = 1.0 - mass;
    for (std::size_t i = 0; i < states.size(); ++i)
        if (x[i] != 0.0) res.dist.p[states[i]] = x[i] / mass;
    return res;
}

double pmat_closed(int t, int m) {
    if (t == kMinusInfinity) return m == 0 ? 1.0 : 0.0;
    if (m < std::max(t, 0)) return 0.0;
    double v = pw2d(-static_cast<long long>(m) * (m - t));
    for (int i = 1; i <= m; ++i) v /= 1.0 - std::ldexp(1.0, -i);
    for (int i = 1; i <= m - t; ++i) v /= 1.0 - std::ldexp(1.0, -i);
    return v * prod_one_minus_half_powers();
}

namespace {

// Type C joint law of the two pillar coranks, P(*, m1', m2').
double pstar_joint(int t1, int t2, int m1, int m2) {
    if (m1 < 0 || m2 < 0 || m1 - m2 < t1 || m2 - m1 < t2) return 0.0;
    double v = pw2d(static_cast<long long>(m1) * m2 - static_cast<long long>(m1) * (m1 - t1) -
                    static_cast<long long>(m2) * (m2 - t2));
    for (int i = 1; i <= -t1 - t2; ++i) v *= 1.0 - std::ldexp(1.0, -i);
    for (int i = 1; i <= m1; ++i) v /= 1.0 - std::ldexp(1.0, -i);
    for (int i = 1; i <= m1 - m2 - t1; ++i) v /= 1.0 - std::ldexp(1.0, -i);
    for (int i = 1; i <= m2; ++i) v /= 1.0 - std::ldexp(1.0, -i);
    for (int i = 1; i <= m2 - m1 - t2; ++i) v /= 1.0 - std::ldexp(1.0, -i);
    return v * prod_one_minus_half_powers();
}

// The conditional factor lambda_{T,A,B} of the type C joint equilibrium.
double lambda_tab(int T, int A, int B) {
    if (T < 0 || A < 0 || A > 2 * T) return 0.0;
    if (B < 0 || B > std::min(A, 2 * T - A) || parity(B) != parity(A)) return 0.0;
    double v = pw2d(static_cast<long long>(A - B) * (2 * T - A - B) / 2);
    for (int i = 1; i <= A - B; ++i) v *= pw2d(B + i) - 1.0;
    for (int i = 1; i <= (A - B) / 2; ++i) v /= pw2d(2 * i) - 1.0;
    for (int i = (A - B) / 2; i <= A / 2 - 1; ++i) v *= pw2d(2 * T + 2 - 2 * A + 2 * i) - 1.0;
    for (int i = 0; i <= A / 2 - 1; ++i) v /= pw2d(2 * T - 1 - 2 * i) - 1.0;
    return v;
}

}  // namespace

Distribution equilibrium_closed(const ChainSpec &spec) {
    spec.validate();
    Distribution d;
    switch (spec.type) {
        case ChainType::A: {
            const double c = prod_one_plus_half_powers_inv();
            for (int m = parity(spec.r); m <= spec.truncation; m += 2) {
                double v = c;
                for (int i = 1; i <= m; ++i) v *= 2.0 / (pw2d(i) - 1.0);
                d.p[{m, 0, 0}] = v;
            }
            break;
        }
        case ChainType::B: {
            const int t1 = spec.t[0];
            for (int m1 = std::max(t1, 0); m1 <= spec.truncation; ++m1) {
                double base = pmat_closed(t1, m1) *
                              pw2d(-static_cast<long long>(m1 - t1) * (m1 - t1 - 1) / 2);
                for (int l = 0; l <= m1 - t1; l += 2) {
                    int m = 2 * m1 - t1 - l;
                    if (m > spec.truncation || m < m1) continue;
                    double v = base;
                    for (int i = 0; i <= l - 1; ++i) v *= pw2d(m1 - t1 - i) - 1.0;
                    for (int i = 1; i <= l / 2; ++i) v *= pw2d(2 * (i - 1)) / (pw2d(2 * i) - 1.0);
                    d.p[{m, m1, 0}] = v;
                }
            }
            break;
        }
        case ChainType::C: {
            const int t1 = spec.t[0], t2 = spec.t[1];
            const int T = -(t1 + t2) / 2;
            for (const State &st : spec.states()) {
                int A = st.m2 - st.m1 - t2, B = st.m - st.m1 - st.m2;
                double v = pstar_joint(t1, t2, st.m1, st.m2) * lambda_tab(T, A, B);
                if (v != 0.0) d.p[st] = v;
            }
            break;
        }
    }
    return d;
}

DriftReport check_drift(const ChainSpec &spec, int xi) {
    spec.validate();
    DriftReport rep;
    std::vector<std::pair<State, double>> ratios;
    for (const State &st : spec.states()) {
        double ratio = 0;
        for (const auto &[to, p] : transition_row(spec, st))
            ratio += static_cast<double>(p) * pw2d(static_cast<long long>(xi) * (to.m - st.m));
        ratios.emplace_back(st, ratio);
        if (ratio >= 1.0) rep.witnesses.push_back(st);
    }
    int max_witness_m = -2;
    for (const State &w : rep.witnesses) max_witness_m = std::max(max_witness_m, w.m);
    rep.threshold_m = max_witness_m + 2;
    rep.lambda_sup = 0.0;
    bool any = false;
    for (const auto &[st, ratio] : ratios)
        if (st.m >= rep.threshold_m) {
            rep.lambda_sup = std::max(rep.lambda_sup, ratio);
            any = true;
        }
    rep.driftable = any && rep.lambda_sup < 1.0;
    return rep;
}

ValidationReport chain_validate(const ChainSpec &spec, const StepSampler &sampler,
                                std::uint64_t samples, std::uint64_t seed,
                                std::uint64_t min_source_count, unsigned jobs) {
    spec.validate();
    if (jobs == 0) jobs = 1;
    struct Tally {
        std::map<std::pair<State, State>, std::uint64_t> steps;
        std::map<State, std::uint64_t> sources;
        std::uint64_t forbidden = 0;
    };
    std::vector<Tally> tallies(jobs);
    auto work = [&](unsigned shard) {
        CounterRng rng(seed, shard);
        Tally &t = tallies[shard];
        std::uint64_t n = samples / jobs + (shard < samples % jobs ? 1 : 0);
        for (std::uint64_t i = 0; i < n; ++i) {
            auto [from, to] = sampler(rng);
            int dm = to.m - from.m, d1 = to.m1 - from.m1, d2 = to.m2 - from.m2;
            if ((dm != 0 && dm != 2 && dm != -2) || d1 < -2 || d1 > 1 || d2 < -2 || d2 > 1)
                ++t.forbidden;
            ++t.sources[from];
            ++t.steps[{from, to}];
        }
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (unsigned j = 0; j < jobs; ++j) threads.emplace_back(work, j);
        for (auto &th : threads) th.join();
    }
    Tally all;
    for (const Tally &t : tallies) {
        for (const auto &[k, v] : t.steps) all.steps[k] += v;
        for (const auto &[k, v] : t.sources) all.sources[k] += v;
        all.forbidden += t.forbidden;
    }

    ValidationReport rep;
    rep.samples = samples;
    rep.min_source_count = min_source_count;
    rep.forbidden_jumps = all.forbidden;
    for (const auto &[from, n] : all.sources) {
        if (n < min_source_count) {
            rep.excluded_sources.push_back(from);
            continue;
        }
        // Union of observed targets and the exact table's targets.
        std::map<State, std::uint64_t> observed;
        for (const auto &[key, cnt] : all.steps)
            if (key.first == from) observed[key.second] = cnt;
        std::map<State, double> expected;
        for (const auto &[to, p] : transition_row(spec, from))
            expected[to] = static_cast<double>(p);
        std::map<State, bool> targets;
        for (const auto &[to, cnt] : observed) targets[to] = true;
        for (const auto &[to, p] : expected) targets[to] = true;
        for (const auto &[to, unused] : targets) {
            (void)unused;
            TransitionDeviation td;
            td.from = from;
            td.to = to;
            td.source_count = n;
            auto ito = observed.find(to);
            td.empirical = ito == observed.end() ? 0.0 : static_cast<double>(ito->second) / n;
            auto ite = expected.find(to);
            td.expected = ite == expected.end() ? 0.0 : ite->second;
            td.stderr_binomial = std::sqrt(std::max(td.expected * (1 - td.expected), 1e-12) / n);
            rep.transitions.push_back(td);
            rep.max_deviation = std::max(rep.max_deviation, std::abs(td.empirical - td.expected));
        }
    }
    return rep;
}

std::string transition_table_csv(const ChainSpec &spec) {
    std::ostringstream os;
    os << "m,m1,m2,m_new,m1_new,m2_new,prob_num,prob_den_log2\n";
    for (const State &from : spec.states())
        for (const auto &[to, p] : transition_row(spec, from)) {
            cpp_int den = boost::multiprecision::denominator(p);
            long log2den = 0;
            cpp_int d = den;
            while (d > 1) {
                if (d % 2 != 0) throw std::logic_error("non-dyadic transition probability");
                d /= 2;
                ++log2den;
            }
            os << from.m << ',' << from.m1 << ',' << from.m2 << ',' << to.m << ',' << to.m1
               << ',' << to.m2 << ',' << boost::multiprecision::numerator(p) << ',' << log2den
               << '\n';
        }
    return os.str();
}

}  // namespace selmerlab::chains
