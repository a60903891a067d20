// Acceptance suite: end-to-end checks tying the exact chain tables, the
// matrix-model Monte Carlo, the descent machinery and the density
// experiments together.  Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.  `acceptance --only N` runs a single one.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "selmerlab/arith.hpp"
#include "selmerlab/chains.hpp"
#include "selmerlab/descent.hpp"
#include "selmerlab/experiments.hpp"
#include "selmerlab/gf2.hpp"
#include "selmerlab/model.hpp"
#include "selmerlab/moments.hpp"
#include "selmerlab/redei.hpp"
#include "selmerlab/rng.hpp"

using namespace selmerlab;
using chains::ChainSpec;
using chains::ChainType;
using chains::Rational;
using chains::State;

namespace {

unsigned default_jobs() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 4 : hw;
}

void parallel_shards(unsigned jobs, const std::function<void(unsigned)> &work) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned j = 0; j < jobs; ++j)
        threads.emplace_back([&, j] {
            try {
                work(j);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    for (auto &t : threads) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string &why) {
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
};

// The shared parameter sets for the chain-level criteria.
std::vector<ChainSpec> chain_specs(int truncation) {
    return {
        {ChainType::A, 0, {}, truncation},       {ChainType::A, 1, {}, truncation},
        {ChainType::B, 0, {-2}, truncation},     {ChainType::B, 0, {0}, truncation},
        {ChainType::B, 0, {2}, truncation},      {ChainType::C, 0, {0, 0}, truncation},
        {ChainType::C, 0, {0, -2}, truncation},  {ChainType::C, 0, {2, -2}, truncation},
    };
}

std::string spec_name(const ChainSpec &sp) {
    std::ostringstream os;
    os << "ABC"[static_cast<int>(sp.type)] << "(r=" << sp.r;
    for (int t : sp.t) os << ",t=" << t;
    os << ")";
    return os.str();
}

// The reference twist classes: one per type.
descent::TwistClass class_a() {
    return descent::TwistClass(descent::CurveFamily(1, -1),
                               arith::PlaceSet(std::vector<long long>{}), arith::SquareClass{},
                               {0, 0});
}

descent::TwistClass class_b() {
    arith::PlaceSet sigma({3});
    return descent::TwistClass(descent::CurveFamily(1, -3), sigma,
                               arith::square_class_of(-1, sigma), {0, 0, 0});
}

descent::TwistClass class_c() {
    arith::PlaceSet sigma({3, 5});
    return descent::TwistClass(descent::CurveFamily(9, 25), sigma,
                               arith::square_class_of(-1, sigma), {0, 0, 0, 0});
}

Rational first_moment_target(const std::vector<int> &t) {
    Rational target = 3;
    for (int ti : t) {
        if (ti >= 0)
            target += Rational(1LL << ti);
        else
            target += Rational(1, 1LL << (-ti));
    }
    return target;
}

// ---------------------------------------------------------------------------
// 1. Exact transition tables
// ---------------------------------------------------------------------------

Outcome criterion_1() {
    Outcome out;
    std::size_t rows = 0;
    for (const ChainSpec &sp : chain_specs(20)) {
        for (const State &st : sp.states()) {
            Rational sum = 0;
            for (const auto &[to, p] : chains::transition_row(sp, st)) {
                if (p <= 0) out.fail(spec_name(sp) + ": nonpositive entry at " + st.to_string());
                sum += p;
            }
            if (sum != 1) out.fail(spec_name(sp) + ": row sum != 1 at " + st.to_string());
            ++rows;
        }
    }
    std::ostringstream os;
    os << rows << " rows across " << chain_specs(20).size() << " parameter sets, exact";
    if (out.pass) out.detail = os.str();
    return out;
}

// ---------------------------------------------------------------------------
// 2. Equilibria: power iteration vs closed forms
// ---------------------------------------------------------------------------

Outcome criterion_2() {
    Outcome out;
    double worst = 0;
    for (const ChainSpec &sp : chain_specs(40)) {
        const chains::Distribution closed = chains::equilibrium_closed(sp);
        const chains::PowerIterationResult power = chains::equilibrium_power(sp, 1e-12);
        const double tv = closed.tv_distance(power.dist);
        worst = std::max(worst, tv);
        if (tv > 1e-9) {
            std::ostringstream os;
            os << spec_name(sp) << ": TV " << tv;
            out.fail(os.str());
        }
    }
    std::ostringstream os;
    os << "max TV " << worst << " <= 1e-9 over " << chain_specs(40).size() << " parameter sets";
    if (out.pass) out.detail = os.str();
    return out;
}

// ---------------------------------------------------------------------------
// 3. Exact moments and generating functions
// ---------------------------------------------------------------------------

Outcome criterion_3() {
    Outcome out;
    auto want = [&](ChainType ty, int r, std::vector<int> tt, unsigned xi, Rational expect) {
        const Rational got = moments::moment({ty, r, std::move(tt)}, xi);
        if (got != expect) {
            std::ostringstream os;
            os << "moment xi=" << xi << " got " << got << " want " << expect;
            out.fail(os.str());
        }
    };
    want(ChainType::A, 0, {}, 1, 3);
    want(ChainType::A, 0, {}, 2, 15);
    want(ChainType::A, 0, {}, 3, 135);
    want(ChainType::B, 0, {2}, 1, 7);
    want(ChainType::C, 0, {0, 0}, 1, 5);
    for (const ChainSpec &sp : chain_specs(40)) {
        const double at_one = moments::gen_fn_eval({sp.type, sp.r, sp.t}, 1.0);
        if (std::abs(at_one - 1.0) > 1e-12)
            out.fail(spec_name(sp) + ": generating function != 1 at X=1");
    }
    if (out.pass) out.detail = "3/15/135, 7, 5 exact; F(1) = 1 within 1e-12 on all sets";
    return out;
}

// ---------------------------------------------------------------------------
// 4. Model Monte Carlo vs equilibrium
// ---------------------------------------------------------------------------

Outcome criterion_4() {
    Outcome out;
    const unsigned jobs = default_jobs();
    const std::uint64_t samples = 100000;
    double worst_sigma = 0;
    for (const ChainSpec &sp : chain_specs(40)) {
        const model::ModelParams params{sp.r, sp.t};
        const model::McHistogram hist = model::mc_distribution(params, 30, samples, 41, jobs);
        // Marginal corank histogram vs the equilibrium marginal.
        std::map<int, double> eq;
        for (const auto &[st, p] : chains::equilibrium_closed(sp).p) eq[st.m] += p;
        for (const auto &[mval, p] : eq) {
            if (p < 1e-3) continue;
            auto marg = hist.marginal_m();
            const double emp =
                static_cast<double>(marg.count(mval) ? marg[mval] : 0) /
                static_cast<double>(hist.samples);
            const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(hist.samples));
            worst_sigma = std::max(worst_sigma, std::abs(emp - p) / sigma);
            if (std::abs(emp - p) > 3 * sigma) {
                std::ostringstream os;
                os << spec_name(sp) << ": bin m=" << mval << " off by "
                   << std::abs(emp - p) / sigma << " sigma";
                out.fail(os.str());
            }
        }
        // Mean of 2^corank vs 3 + sum 2^{t_i}.
        double sum = 0, sum2 = 0;
        for (const auto &[st, c] : hist.counts) {
            const double x = std::ldexp(1.0, st.m);
            sum += x * static_cast<double>(c);
            sum2 += x * x * static_cast<double>(c);
        }
        const double n = static_cast<double>(hist.samples);
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);
        const double target = static_cast<double>(first_moment_target(sp.t));
        if (std::abs(mean - target) > 2 * se) {
            std::ostringstream os;
            os << spec_name(sp) << ": mean 2^m = " << mean << " vs " << target << " (se " << se
               << ")";
            out.fail(os.str());
        }
    }
    std::ostringstream os;
    os << "k=30, 1e5 samples/set; worst bin deviation " << worst_sigma << " sigma";
    if (out.pass) out.detail = os.str();
    return out;
}

// ---------------------------------------------------------------------------
// 5. Descent oracle equivalence
// ---------------------------------------------------------------------------

Outcome criterion_5() {
    Outcome out;
    const std::vector<std::pair<long long, long long>> families = {{1, -1}, {1, -3}, {9, 25}};
    std::atomic<std::uint64_t> twists{0}, classes{0};
    std::mutex mu;
    for (const auto &[e1, e2] : families) {
        const descent::CurveFamily family(e1, e2);
        const arith::PlaceSet sigma = family.sigma0();
        const std::size_t SG = sigma.num_generators();
        std::atomic<std::uint32_t> next_q{0};
        parallel_shards(default_jobs(), [&](unsigned) {
            for (std::uint32_t qb = next_q.fetch_add(1); qb < (1u << SG);
                 qb = next_q.fetch_add(1)) {
                const arith::SquareClass q{qb};
                std::map<std::vector<std::uint8_t>, descent::TwistClass> table;
                arith::sieve_squarefree(
                    1000, sigma, std::nullopt,
                    [&](std::uint64_t n, const std::vector<std::uint32_t> &factors) {
                        if (factors.empty()) return;
                        const auto s = arith::symbol_vector(factors, sigma);
                        auto it = table.find(s);
                        if (it == table.end())
                            it = table.emplace(s, descent::TwistClass(family, sigma, q, s)).first;
                        const descent::TwistClass &cls = it->second;
                        const long long nn = static_cast<long long>(n);
                        const descent::SelmerDims got =
                            descent::build_kernel_matrices(cls, nn).dims(cls);
                        const descent::SelmerData oracle =
                            descent::selmer_oracle(family, cls.m_of(nn), sigma);
                        gf2::BitMatrix gram = descent::build_gram_matrix(cls, nn);
                        bool ok = got.sel2 == oracle.dims.sel2 &&
                                  got.essential == oracle.dims.essential &&
                                  static_cast<int>(gf2::corank(gram)) == oracle.dims.sel2;
                        for (std::size_t j = 0; j < 3; ++j)
                            ok = ok && got.strict[j] == oracle.dims.strict[j] &&
                                 got.modified[j] == oracle.dims.modified[j] &&
                                 got.strict_essential[j] == oracle.dims.strict_essential[j] &&
                                 got.modified_essential[j] == oracle.dims.modified_essential[j];
                        if (!ok) {
                            std::scoped_lock lock(mu);
                            std::ostringstream os;
                            os << "mismatch at (" << e1 << "," << e2 << ") m=" << cls.m_of(nn);
                            out.fail(os.str());
                        }
                        ++twists;
                    });
                classes += table.size();
            }
        });
    }
    std::ostringstream os;
    os << "matrix = Gram = enumeration on " << twists.load() << " twists in " << classes.load()
       << " classes, all dims";
    if (out.pass) out.detail = os.str();
    return out;
}

// ---------------------------------------------------------------------------
// 6. Parameter reproduction and place-set invariance
// ---------------------------------------------------------------------------

Outcome criterion_6() {
    Outcome out;
    const descent::CurveFamily family(1, -3);
    auto param_of = [&](const arith::PlaceSet &sigma, std::vector<std::uint8_t> s) {
        descent::TwistClass cls(family, sigma, arith::square_class_of(-1, sigma), std::move(s));
        return descent::parameter(cls);
    };
    const arith::PlaceSet base({3});
    // Twists -n with n = 1 mod 12: sign and mod-3 symbols fixed, both mod-8
    // refinements.
    for (std::uint8_t s2 : {0, 1}) {
        if (param_of(base, {0, s2, 0}) != std::vector<int>{2}) {
            out.fail("base refinement s2=" + std::to_string(s2) + " != (2)");
        }
    }
    // Invariance under adjoining one new prime, three choices.
    for (long long p : {7LL, 11LL, 13LL}) {
        const arith::PlaceSet bigger = base.with_prime(p);
        for (std::uint8_t sp : {0, 1}) {
            if (param_of(bigger, {0, 0, 0, sp}) != std::vector<int>{2}) {
                out.fail("sigma+{" + std::to_string(p) + "}, sp=" + std::to_string(sp) +
                         " != (2)");
            }
        }
    }
    if (out.pass) out.detail = "t = (2) on both mod-8 refinements and after adjoining 7, 11, 13";
    return out;
}

// ---------------------------------------------------------------------------
// 7. Chain validation against the class step sampler
// ---------------------------------------------------------------------------

Outcome criterion_7() {
    Outcome out;
    const unsigned jobs = default_jobs();
    std::ostringstream summary;
    for (const descent::TwistClass &cls : {class_b(), class_c()}) {
        const ChainSpec spec = descent::class_chain_spec(cls);
        const chains::ValidationReport rep = chains::chain_validate(
            spec, descent::class_step_sampler(cls, 12), 1000000, 1007, 10000, jobs);
        summary << spec_name(spec) << ": dev " << rep.max_deviation << " over "
                << rep.transitions.size() << " transitions; ";
        if (rep.forbidden_jumps != 0) out.fail(spec_name(spec) + ": forbidden jumps observed");
        if (rep.max_deviation > 0.01) {
            std::ostringstream os;
            os << spec_name(spec) << ": max deviation " << rep.max_deviation;
            out.fail(os.str());
        }
        if (rep.transitions.empty()) out.fail(spec_name(spec) + ": no transitions measured");
    }
    if (out.pass) out.detail = "k=12, 1e6 steps/class; " + summary.str();
    return out;
}

// ---------------------------------------------------------------------------
// 8. Exact omega-average of the kernel order
// ---------------------------------------------------------------------------

// The kernel matrix of a class as a symbolic block expression, uniform in k:
// row groups [K, K, one fixed row per quotient condition], column groups
// [K, K, one fixed column per place-set exponent and component].
redei::RedeiExpr selmer_expr(const descent::TwistClass &cls) {
    const arith::PlaceSet &sigma = cls.sigma();
    const std::size_t SG = sigma.num_generators();
    const long long e1 = cls.family().e1, e2 = cls.family().e2;
    auto sc = [&](long long x) { return arith::square_class_of(x, sigma); };
    auto unit = [](std::size_t g) {
        arith::SquareClass c;
        c.set(g, true);
        return c;
    };
    redei::RedeiExpr ex;
    ex.sigma = sigma;
    ex.restricted = true;
    ex.row_dims = {redei::BlockDim::K(), redei::BlockDim::K()};
    ex.col_dims = {redei::BlockDim::K(), redei::BlockDim::K()};
    for (std::size_t c = 0; c < 2 * SG; ++c) ex.col_dims.push_back(redei::BlockDim::Fixed(1));

    auto empty_row = [&] { return std::vector<redei::Block>(2 + 2 * SG); };
    // Rows for the primes: symbol blocks plus the diagonal twists.
    std::vector<redei::Block> row0 = empty_row(), row1 = empty_row();
    row0[0].terms = {redei::Primitive::a(), redei::Primitive::diag(sc(e1) * cls.q())};
    row0[1].terms = {redei::Primitive::diag(sc(e1 * e2))};
    row1[0].terms = {redei::Primitive::diag(sc(e1 * (e1 - e2)))};
    row1[1].terms = {redei::Primitive::a(), redei::Primitive::diag(sc(-e1) * cls.q())};
    for (std::size_t g = 0; g < SG; ++g) {
        row0[2 + g].terms = {redei::Primitive::zcol(unit(g))};
        row1[2 + SG + g].terms = {redei::Primitive::zcol(unit(g))};
    }
    ex.grid = {std::move(row0), std::move(row1)};

    // Rows for the places: quotient maps composed with the localization of
    // each column generator; prime columns localize through their symbols.
    for (std::size_t pi = 0; pi < SG; ++pi) {
        const arith::Place place = sigma.place(pi);
        const std::size_t ld = place.local_dim();
        // Square class whose symbol column equals local basis bit b at a
        // generic prime; b without a contribution maps to no term.
        auto sym_class = [&](std::size_t b) -> std::optional<arith::SquareClass> {
            if (place.is_odd()) {
                if (b != 0) return std::nullopt;
                arith::SquareClass c = unit(pi);
                if (arith::legendre_additive(-1, place.p)) c = c * unit(0);
                return c;
            }
            if (place.is_two()) {
                if (b == 0) return unit(0);
                if (b == 2) return unit(1);
                return std::nullopt;
            }
            return std::nullopt;  // infinity: primes are positive
        };
        const gf2::BitMatrix &Q = cls.cache().quotient_maps[pi];
        for (std::size_t r = 0; r < Q.rows(); ++r) {
            std::vector<redei::Block> row = empty_row();
            for (int comp = 0; comp < 2; ++comp) {
                for (std::size_t b = 0; b < ld; ++b) {
                    if (!Q.get(r, static_cast<std::size_t>(comp) * ld + b)) continue;
                    if (auto c = sym_class(b)) row[comp].terms.push_back(redei::Primitive::zrow(*c));
                }
                for (std::size_t g = 0; g < SG; ++g) {
                    const std::uint8_t loc = arith::localize(sigma.generator(g), 1, place).coords;
                    int bit = 0;
                    for (std::size_t b = 0; b < ld; ++b)
                        if ((loc >> b) & 1 && Q.get(r, static_cast<std::size_t>(comp) * ld + b))
                            bit ^= 1;
                    if (bit) {
                        gf2::BitMatrix one(1, 1);
                        one.set(0, 0, true);
                        row[2 + static_cast<std::size_t>(comp) * SG + g].terms = {
                            redei::Primitive::constant(std::move(one))};
                    }
                }
            }
            ex.row_dims.push_back(redei::BlockDim::Fixed(1));
            ex.grid.push_back(std::move(row));
        }
    }
    return ex;
}

Outcome criterion_8() {
    Outcome out;
    for (const descent::TwistClass &cls : {class_a(), class_b(), class_c()}) {
        const redei::RedeiExpr expr = selmer_expr(cls);
        const std::string name = std::string(1, "ABC"[static_cast<int>(cls.type())]);
        // The expression reproduces the assembled kernel matrix exactly.
        CounterRng rng(81);
        for (std::size_t k : {2, 4, 7}) {
            const arith::OmegaPoint omega = redei::sample_omega(k, cls.sigma(), cls.s(), rng);
            if (!(redei::eval(expr, omega) == descent::build_kernel_matrices(cls, omega).B)) {
                out.fail(name + ": expression != kernel matrix at k=" + std::to_string(k));
            }
        }
        // Exact omega-average: the full kernel carries the 2-dimensional
        // forced subgroup, so E[2^dim] = 4 * (3 + sum 2^{t_i}) for the class
        // parameter t; equivalently the forced-subgroup quotient averages to
        // 3 + sum 2^{t_i} exactly.
        const std::vector<int> param = descent::parameter(cls);
        const Rational target = first_moment_target(param);
        const Rational hb =
            moments::hb_average(moments::UnlinkedFrame::of(expr, cls.s()), expr);
        if (hb != 4 * target) {
            std::ostringstream os;
            os << name << ": average " << hb << " != 4 * " << target;
            out.fail(os.str());
        }
        // Bound for the full average with a = c = 2, b, d fixed sizes.
        const moments::UnlinkedFrame frame = moments::UnlinkedFrame::of(expr, cls.s());
        Rational bound = 3;
        for (std::size_t i = 0; i < frame.c * (frame.c + 3) / 2 + frame.d; ++i) bound *= 2;
        if (!(1 <= hb && hb < bound)) out.fail(name + ": average outside [1, 3*2^{c(c+3)/2+d})");
        // Monte Carlo cross-check at k = 24.
        const std::size_t mc = 3000;
        double sum = 0, sum2 = 0;
        CounterRng mc_rng(82);
        for (std::size_t i = 0; i < mc; ++i) {
            const arith::OmegaPoint omega = redei::sample_omega(24, cls.sigma(), cls.s(), mc_rng);
            const int ess = descent::build_kernel_matrices(cls, omega).dims(cls).essential;
            const double x = std::ldexp(1.0, ess);
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / static_cast<double>(mc);
        const double se =
            std::sqrt((sum2 / static_cast<double>(mc) - mean * mean) / static_cast<double>(mc));
        if (std::abs(mean - static_cast<double>(target)) > 3 * se) {
            std::ostringstream os;
            os << name << ": MC mean " << mean << " vs " << target << " (se " << se << ")";
            out.fail(os.str());
        }
    }
    if (out.pass)
        out.detail = "exact averages 3, 7, 3+2^{t_1}+2^{t_2} reproduced; MC at k=24 within 3 se";
    return out;
}

// ---------------------------------------------------------------------------
// 9. Density trend at large sieve bounds
// ---------------------------------------------------------------------------

// L1 distance between the empirical dimension law of the class below N and
// the chain model evolved to the matched number of prime factors: the model
// law at omega(n) = k is the exact k-step distribution (the k = 1
// configuration of a class is unique, so the start is a point mass), mixed
// with the empirical omega weights.  Convergence to the k = infinity
// equilibrium itself is triple-logarithmic in N and out of reach of any
// desk-scale sieve, so the matched-k law is the model's actual prediction
// at a finite range.
double matched_l1(const descent::TwistClass &cls, std::uint64_t max_n) {
    const ChainSpec spec = descent::class_chain_spec(cls);
    const std::vector<std::size_t> holes = cls.holes();
    auto state_of = [&](const descent::SelmerDims &d) {
        State st{d.essential, 0, 0};
        if (!holes.empty()) st.m1 = d.modified_essential[holes[0]];
        if (holes.size() > 1) st.m2 = d.modified_essential[holes[1]];
        return st;
    };
    std::map<State, std::uint64_t> emp;
    std::map<std::size_t, std::uint64_t> omega_weights;
    std::uint64_t total = 0;
    arith::sieve_squarefree(max_n, cls.sigma(), cls.s(),
                            [&](std::uint64_t n, const std::vector<std::uint32_t> &factors) {
                                if (factors.empty()) return;
                                const descent::SelmerDims d =
                                    descent::build_kernel_matrices(cls,
                                                                   static_cast<long long>(n))
                                        .dims(cls);
                                emp[state_of(d)]++;
                                omega_weights[factors.size()]++;
                                ++total;
                            });
    // Exact chain laws P^{(k)} from the unique k = 1 configuration.
    CounterRng rng(9);
    const arith::OmegaPoint start = redei::sample_omega(1, cls.sigma(), cls.s(), rng);
    State st1 = state_of(descent::build_kernel_matrices(cls, start).dims(cls));
    std::map<State, double> law{{st1, 1.0}};
    std::map<State, double> model;
    const std::size_t k_max = omega_weights.rbegin()->first;
    for (std::size_t k = 1; k <= k_max; ++k) {
        if (auto it = omega_weights.find(k); it != omega_weights.end()) {
            const double w = static_cast<double>(it->second) / static_cast<double>(total);
            for (const auto &[st, p] : law) model[st] += w * p;
        }
        std::map<State, double> next;
        for (const auto &[st, p] : law)
            for (const auto &[to, q] : chains::transition_row(spec, st))
                next[to] += p * static_cast<double>(q);
        law = std::move(next);
    }
    double l1 = 0;
    for (const auto &[st, c] : emp)
        l1 += std::abs(static_cast<double>(c) / static_cast<double>(total) -
                       (model.count(st) ? model[st] : 0.0));
    for (const auto &[st, p] : model)
        if (!emp.count(st)) l1 += p;
    return l1;
}

Outcome criterion_9() {
    Outcome out;
    const unsigned jobs = default_jobs();
    const descent::TwistClass cong = class_a();
    const double big = matched_l1(cong, 1000000);
    const double small = matched_l1(cong, 10000);
    std::ostringstream os;
    os << "matched-k L1 " << small << " (1e4) -> " << big << " (1e6)";
    if (big >= 0.05) out.fail("L1 at 1e6 is " + std::to_string(big));
    if (big >= small) out.fail("L1 did not shrink from 1e4 to 1e6");
    // Forced lower bound dim >= max t_i: exercised on the holed class, where
    // t = (2); the unholed class has no constraint.
    const descent::TwistClass holed = class_b();
    const experiments::DensityReport brep =
        experiments::run_density(holed, 100000, experiments::DimMode::Matrix, false, jobs);
    std::uint64_t exceptions = 0;
    for (const auto &[st, c] : brep.joint_counts)
        if (st.m < 2 || st.m1 < 2) exceptions += c;
    if (exceptions != 0)
        out.fail("lower bound dim >= max t_i violated " + std::to_string(exceptions) + " times");
    os << "; lower-bound exceptions 0/" << brep.total;
    if (out.pass) out.detail = os.str();
    return out;
}

// ---------------------------------------------------------------------------
// 10. Collapse of the non-square direction
// ---------------------------------------------------------------------------

Outcome criterion_10() {
    Outcome out;
    // For the holed family the non-square direction has no pillar: its
    // refined dimension collapses to 0 as the number of prime factors grows
    // (rectangular model with a degenerate parameter).  Binned by k with 1e6
    // synthetic configurations in total.
    const descent::TwistClass cls = class_b();
    const std::vector<std::size_t> bins = {4, 8, 12, 16, 20};
    const std::uint64_t per_bin = 200000;
    const unsigned jobs = default_jobs();
    std::vector<double> positive;
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
        std::atomic<std::uint64_t> hits{0};
        parallel_shards(jobs, [&](unsigned j) {
            CounterRng rng(2026, static_cast<std::uint64_t>(bi) * 64 + j);
            std::uint64_t local = 0;
            for (std::uint64_t i = j; i < per_bin; i += jobs) {
                const arith::OmegaPoint omega =
                    redei::sample_omega(bins[bi], cls.sigma(), cls.s(), rng);
                if (descent::build_kernel_matrices(cls, omega).dims(cls).modified_essential[1] >
                    0)
                    ++local;
            }
            hits += local;
        });
        positive.push_back(static_cast<double>(hits.load()) / static_cast<double>(per_bin));
    }
    std::ostringstream os;
    os << "P(dim > 0) by k bin:";
    for (std::size_t i = 0; i < bins.size(); ++i) os << " " << bins[i] << ":" << positive[i];
    for (std::size_t i = 1; i < positive.size(); ++i)
        if (positive[i] >= positive[i - 1]) out.fail("not decreasing at bin " + std::to_string(i));
    if (positive.back() >= 0.01)
        out.fail("top bin probability " + std::to_string(positive.back()) + " >= 0.01");
    if (out.pass) out.detail = os.str();
    return out;
}

// ---------------------------------------------------------------------------
// 11. Structural identities
// ---------------------------------------------------------------------------

Outcome criterion_11() {
    Outcome out;
    CounterRng rng(111);
    // Symbol-configuration identities: transpose relation and zero row sums,
    // 100 random instances, exact.
    const std::vector<arith::PlaceSet> sigmas = {
        arith::PlaceSet(std::vector<long long>{}), arith::PlaceSet({3}),
        arith::PlaceSet({3, 7})};
    for (int trial = 0; trial < 100; ++trial) {
        const arith::PlaceSet &sigma = sigmas[trial % sigmas.size()];
        std::vector<std::uint8_t> s(sigma.num_generators());
        for (auto &b : s) b = static_cast<std::uint8_t>(rng.next_bit());
        const std::size_t k = 2 + rng.next_below(8);
        const arith::OmegaPoint omega = redei::sample_omega(k, sigma, s, rng);
        omega.check();
        for (std::size_t i = 0; i < k; ++i) {
            int row_sum = 0;
            for (std::size_t j = 0; j < k; ++j) {
                row_sum ^= omega.a.get(i, j) ? 1 : 0;
                if (i != j &&
                    omega.a.get(j, i) !=
                        (omega.a.get(i, j) ^ (omega.z[0].get(i) && omega.z[0].get(j))))
                    out.fail("transpose identity failed");
            }
            if (row_sum != 0) out.fail("row sum failed");
        }
        if (omega.sign_vector() != s) out.fail("sign vector failed");
    }
    // Lagrangian complements on 100 random transvection-transformed
    // instances; the routine re-checks its own postconditions.
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng.next_below(5);
        descent::QuadraticSpace sp;
        sp.e = gf2::BitMatrix(2 * d, 2 * d);
        sp.phi = gf2::BitVec(2 * d);
        for (std::size_t i = 0; i < d; ++i) {
            sp.e.set(2 * i, 2 * i + 1, true);
            sp.e.set(2 * i + 1, 2 * i, true);
        }
        auto transform = [&](std::vector<gf2::BitVec> basis) {
            for (int step = 0; step < 6; ++step) {
                gf2::BitVec v(2 * d);
                do {
                    for (std::size_t i = 0; i < 2 * d; ++i) v.set(i, rng.next_bit());
                } while (sp.eval(v) != 1);
                for (auto &x : basis)
                    if (sp.pair(x, v)) x ^= v;
            }
            return basis;
        };
        std::vector<gf2::BitVec> u0, w0;
        for (std::size_t i = 0; i < d; ++i) {
            gf2::BitVec a(2 * d), b(2 * d);
            a.set(2 * i, true);
            b.set(2 * i + 1, true);
            u0.push_back(a);
            w0.push_back(b);
        }
        try {
            if (descent::find_lagrangian_complement(sp, transform(u0), transform(w0)).size() != d)
                out.fail("complement has wrong dimension");
        } catch (const std::exception &e) {
            out.fail(std::string("complement search failed: ") + e.what());
        }
    }
    // Reciprocity and the product formula for the local symbols, exact.
    const std::vector<long long> pool = {-1, 2, 3, 5, 7, 11, 13, -3, -7, 15, 21, -30, 35};
    for (int trial = 0; trial < 200; ++trial) {
        const long long a = pool[rng.next_below(pool.size())];
        const long long b = pool[rng.next_below(pool.size())];
        int total = arith::hilbert_additive(a, b, arith::Place::infinity()) ^
                    arith::hilbert_additive(a, b, arith::Place::two());
        for (long long p = 3; p <= 100; p += 2)
            if (arith::is_prime(p) && ((a % p == 0) || (b % p == 0)))
                total ^= arith::hilbert_additive(a, b, arith::Place::odd(p));
        if (total != 0) out.fail("product formula failed");
    }
    for (int trial = 0; trial < 100; ++trial) {
        const long long primes[] = {3, 5, 7, 11, 13, 17, 19, 23, 29, 31};
        const long long p = primes[rng.next_below(10)];
        long long q = primes[rng.next_below(10)];
        if (p == q) continue;
        const int lhs = arith::legendre_additive(p, q) ^ arith::legendre_additive(q, p);
        const int rhs = static_cast<int>(((p - 1) / 2) * ((q - 1) / 2) % 2);
        if (lhs != rhs) out.fail("quadratic reciprocity failed");
    }
    if (out.pass)
        out.detail = "symbol identities, 100 Lagrangian instances, reciprocity/product sweeps";
    return out;
}

}  // namespace

int main(int argc, char **argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--only" && i + 1 < argc) only = std::atoi(argv[i + 1]);
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
        {"exact transition tables", criterion_1},
        {"equilibria: power vs closed", criterion_2},
        {"exact moments", criterion_3},
        {"model Monte Carlo vs equilibrium", criterion_4},
        {"descent oracle equivalence", criterion_5},
        {"class parameter reproduction", criterion_6},
        {"chain validation from symbol configurations", criterion_7},
        {"exact omega-average of the kernel order", criterion_8},
        {"density trend", criterion_9},
        {"non-square direction collapse", criterion_10},
        {"structural identities", criterion_11},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception &e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        std::cout << "criterion " << (i + 1 < 10 ? " " : "") << i + 1 << " ("
                  << criteria[i].first << "): " << (out.pass ? "PASS" : "FAIL");
        if (!out.detail.empty()) std::cout << " — " << out.detail;
        std::cout << std::endl;
        if (!out.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
