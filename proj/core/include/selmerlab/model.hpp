// Random alternating matrix models over F2 with 0, 1 or 2 zero diagonal
// blocks ("holes"): sampling, refined corank statistics, the one-step
// extension that realizes the corank Markov chain, and Monte Carlo
// distributions with sharded counter-based sampling.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selmerlab/chains.hpp"
#include "selmerlab/gf2.hpp"
#include "selmerlab/rng.hpp"

namespace selmerlab::model {

// Parameters (r, t) of the model of alternating (2k+r) x (2k+r) matrices:
// s = #t in {0, 1, 2} holes of sizes k + (t_i + r)/2.
struct ModelParams {
    int r = 0;
    std::vector<int> t;

    std::size_t s() const { return t.size(); }
    void validate() const;  // throws on inadmissible parameters
    std::size_t size(std::size_t k) const { return 2 * k + static_cast<std::size_t>(r); }
    // Diagonal block sizes at level k: the s hole blocks first, then the
    // free remainder; throws if any block size would be negative.
    std::vector<std::size_t> block_sizes(std::size_t k) const;
    // Smallest k with all block sizes nonnegative.
    std::size_t min_k() const;
    chains::ChainType chain_type() const;
    chains::ChainSpec chain_spec(int truncation = 40) const;
};

// (corank B, corank B_1', ..., corank B_s') where B_j' is the column block
// of the j-th hole.
struct RefinedCorank {
    int m = 0;
    int m1 = 0;
    int m2 = 0;

    chains::State to_state() const { return {m, m1, m2}; }
    bool operator==(const RefinedCorank &) const = default;
};

// Uniform matrix of the model: symmetric, zero diagonal, zero hole blocks.
gf2::BitMatrix sample_model(const ModelParams &params, std::size_t k, CounterRng &rng);

// Coranks of B and of its hole column blocks.
RefinedCorank refined_corank(const gf2::BitMatrix &B, const ModelParams &params, std::size_t k);

// One chain step: keeps B as the top-left corner of every block pair and
// draws the new last row/column of each growing block uniformly subject to
// the symmetry and hole constraints.
gf2::BitMatrix extend_model(const gf2::BitMatrix &B, const ModelParams &params, std::size_t k,
                            CounterRng &rng);

// Section of extend_model: the top-left-corner projection to level k-1.
gf2::BitMatrix project_model(const gf2::BitMatrix &B, const ModelParams &params, std::size_t k);

struct McHistogram {
    std::map<chains::State, std::uint64_t> counts;
    std::uint64_t samples = 0;

    double freq(const chains::State &st) const;
    double stderr_of(const chains::State &st) const;  // binomial
    std::map<int, std::uint64_t> marginal_m() const;
    // Columns m,m1,m2,count,freq,stderr.
    std::string to_csv() const;
};

// Joint refined-corank histogram over `samples` draws, sharded over `jobs`
// threads with counter-based streams; deterministic for a fixed seed.
McHistogram mc_distribution(const ModelParams &params, std::size_t k, std::uint64_t samples,
                            std::uint64_t seed, unsigned jobs = 1);

// Chain-step sampler over the model at level k, suitable for
// chains::chain_validate: draws B, observes Y_k, extends, observes Y_{k+1}.
chains::StepSampler model_step_sampler(const ModelParams &params, std::size_t k);

}  // namespace selmerlab::model
