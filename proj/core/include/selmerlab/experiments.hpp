// End-to-end empirical studies over a twist class: sieve the admissible n,
// compute the essential Selmer dimensions (fast matrix path or the
// enumeration oracle), and aggregate density histograms, joint laws and
// average orders against the chain equilibrium predictions.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selmerlab/chains.hpp"
#include "selmerlab/descent.hpp"

namespace selmerlab::experiments {

enum class DimMode { Matrix, Oracle };

// Density histogram over {n < N admissible for the class, at least one prime
// factor}.  All statistics are derived from the exact joint counts, so
// reports shard and merge losslessly; merge_counts combines disjoint n
// ranges and finalize recomputes every derived field.
struct DensityReport {
    std::string class_desc;
    std::string mode;                  // "matrix" | "oracle"
    std::uint64_t max_n = 0;           // requested bound
    std::uint64_t achieved_n = 0;      // actually sieved (capacity clamp)
    bool essential_window = false;
    double window_lo = 0, window_hi = 0;  // bounds on omega(n) when windowed

    std::uint64_t population = 0;      // admissible n seen
    std::uint64_t total = 0;           // n kept (inside the window)
    // Joint counts of the state (essential dim, per-hole modified essential
    // dims); everything below derives from them and the per-direction counts.
    std::map<chains::State, std::uint64_t> joint_counts;
    std::map<int, std::uint64_t> dim_counts;               // essential dim S
    std::array<std::map<int, std::uint64_t>, 3> phi_counts;  // modified essential, per direction

    // Model predictions and deviations (filled by finalize).
    int r = 0;
    std::vector<int> t;                  // hole parameters (holes order)
    std::vector<std::size_t> holes;
    std::map<int, double> model_alt;     // limit law of the essential dim
    std::array<std::vector<double>, 3> model_mat;  // rectangular law per direction
    double l1_deviation = 0;             // L1(dim_counts freq, model_alt)
    std::array<double, 4> avg{};         // empirical mean of (#S)^xi, xi = 0..3
    std::array<double, 4> avg_stderr{};
    std::array<double, 4> avg_model{};   // exact moment targets

    void merge_counts(const DensityReport &other);  // counts/population only
    std::string to_json() const;
    std::string to_csv() const;  // m,m1,m2,count,freq per joint state
};

struct AverageReport {
    std::string class_desc;
    std::uint64_t max_n = 0, achieved_n = 0, total = 0;
    unsigned xi = 1;
    bool essential_window = false;
    double mean = 0, stderr_mean = 0, model_target = 0;

    std::string to_json() const;
};

// Sieves the class population up to max_n (clamped to the sieve capacity),
// computes dimensions per twist and aggregates.  The essential window keeps
// only n with |omega(n) - log log N| <= (log log N)^(2/3).  Oracle mode
// enumerates Q(S,2)^2 per twist and is meant for small max_n.
DensityReport run_density(const descent::TwistClass &cls, std::uint64_t max_n, DimMode mode,
                          bool essential_window, unsigned jobs = 1);

// Mean of (#S)^xi over the class population with standard error and the
// exact model target; xi <= 3.
AverageReport run_average(const descent::TwistClass &cls, std::uint64_t max_n, unsigned xi,
                          bool essential_window, unsigned jobs = 1);

}  // namespace selmerlab::experiments
