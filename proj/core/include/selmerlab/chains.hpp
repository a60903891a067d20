// Markov chains of refined coranks for the three alternating matrix models:
// exact transition tables (types A/B/C), equilibrium distributions by power
// iteration and by closed form, drift diagnostics, and empirical validation
// of transition frequencies against the tables.
//
// States are (m, m_1', ..., m_s') with s = 0, 1, 2 pillar coranks; transition
// probabilities are dyadic rationals evaluated exactly in rational mode.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selmerlab/rng.hpp"

namespace selmerlab::chains {

using Rational = boost::multiprecision::cpp_rational;

enum class ChainType : std::uint8_t { A = 0, B = 1, C = 2 };

// Sentinel for t_i = -infinity (the hole degenerates; the pillar corank is
// pinned to 0 with probability 1 in the limit).
inline constexpr int kMinusInfinity = std::numeric_limits<int>::min();

// A state (m, m_1', ..., m_s'); unused components are 0.
struct State {
    int m = 0;
    int m1 = 0;
    int m2 = 0;

    auto operator<=>(const State &) const = default;
    std::string to_string() const;
};

struct ChainSpec {
    ChainType type = ChainType::A;
    int r = 0;                 // corank parity: m = r (mod 2)
    std::vector<int> t;        // hole parameters t_1..t_s, t_i = r (mod 2)
    int truncation = 40;       // states with m <= truncation are kept

    std::size_t s() const { return t.size(); }
    void validate() const;     // throws on inconsistent parameters
    // Membership in the state space I (ranges independent of truncation).
    bool admissible(const State &st) const;
    // All admissible states with m <= truncation, sorted.
    std::vector<State> states() const;
};

// A probability distribution over states (float mode).
struct Distribution {
    std::map<State, double> p;

    double total() const;
    double tv_distance(const Distribution &other) const;
    double operator[](const State &st) const {
        auto it = p.find(st);
        return it == p.end() ? 0.0 : it->second;
    }
};

// Exact transition probability P(state -> state_new); 0 when either state is
// outside I or the jump is not in {0,+-2} x prod {0,+-1}.
Rational transition_prob(const ChainSpec &spec, const State &from, const State &to);

// All targets with nonzero transition probability from `from`.
std::vector<std::pair<State, Rational>> transition_row(const ChainSpec &spec, const State &from);

struct PowerIterationResult {
    Distribution dist;
    double achieved_tv = 0.0;   // TV distance between the last two iterates
    double leakage = 0.0;       // probability mass lost past the truncation
    std::size_t iterations = 0;
    bool converged = false;
};

// Power iteration from a point mass on the truncated state space until the
// successive TV distance drops below tol; the result is renormalized.
PowerIterationResult equilibrium_power(const ChainSpec &spec, double tol,
                                       std::size_t max_iter = 100000,
                                       std::optional<State> start = std::nullopt);

// Closed-form equilibrium on the truncated state space.
Distribution equilibrium_closed(const ChainSpec &spec);

// Corank probability of the rectangular model M_{(k-t) x k}(F2), k -> oo;
// t = kMinusInfinity encodes the point mass at 0.
double pmat_closed(int t, int m);

struct DriftReport {
    double lambda_sup = 0.0;           // sup of the drift ratio over large states
    int threshold_m = 0;               // smallest m0 with ratio < 1 for all m >= m0
    std::vector<State> witnesses;      // states (below m0) where the ratio is >= 1
    bool driftable = false;
};

// Drift diagnostics for nu(state) = 2^(xi * m): computes
// ||P e_j||_nu / nu(j) = sum_i P(j -> i) 2^(xi(m_i - m_j)) for every state of
// the truncation and locates the finite exceptional set.
DriftReport check_drift(const ChainSpec &spec, int xi);

// One observed chain step, produced by a sampler (matrix model or Redei
// matrix source).
using StepSampler = std::function<std::pair<State, State>(CounterRng &)>;

struct TransitionDeviation {
    State from, to;
    double empirical = 0.0, expected = 0.0;
    double stderr_binomial = 0.0;
    std::uint64_t source_count = 0;
};

struct ValidationReport {
    double max_deviation = 0.0;            // over transitions with enough sources
    std::uint64_t min_source_count = 0;    // sources below this are excluded
    std::vector<TransitionDeviation> transitions;
    std::vector<State> excluded_sources;   // seen but with too few samples
    // Steps outside {0,+-2} x prod {-2..1}: pillar coranks may transiently
    // drop by 2 at finite size, but never rise by more than 1.
    std::uint64_t forbidden_jumps = 0;
    std::uint64_t samples = 0;
};

// Draws `samples` chain steps, tabulates empirical transition frequencies and
// compares them with the exact table.  Sharded over `jobs` threads with
// counter-based streams, deterministic for a fixed seed.
ValidationReport chain_validate(const ChainSpec &spec, const StepSampler &sampler,
                                std::uint64_t samples, std::uint64_t seed,
                                std::uint64_t min_source_count = 10000, unsigned jobs = 1);

// CSV dump of the transition table restricted to the truncation:
// m,m1,m2,m_new,m1_new,m2_new,prob_num,prob_den_log2.
std::string transition_table_csv(const ChainSpec &spec);

}  // namespace selmerlab::chains
