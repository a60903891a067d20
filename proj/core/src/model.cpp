#include "selmerlab/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace selmerlab::model {

void ModelParams::validate() const {
    if (r != 0 && r != 1) throw std::invalid_argument("model: r must be 0 or 1");
    if (t.size() > 2) throw std::invalid_argument("model: at most two holes");
    for (int ti : t) {
        if (ti == chains::kMinusInfinity)
            throw std::invalid_argument("model: drop trivial holes from the parameter list");
        if (((ti % 2) + 2) % 2 != r) throw std::invalid_argument("model: t_i = r (mod 2) required");
    }
    if (t.size() == 2 && t[0] + t[1] > 0)
        throw std::invalid_argument("model: t_1 + t_2 <= 0 required");
}

std::vector<std::size_t> ModelParams::block_sizes(std::size_t k) const {
    validate();
    const long long n = 2 * static_cast<long long>(k) + r;
    std::vector<long long> sizes;
    for (int ti : t) sizes.push_back(static_cast<long long>(k) + (ti + r) / 2);
    if (t.empty()) {
        sizes = {static_cast<long long>(k), static_cast<long long>(k) + r};
    } else {
        sizes.push_back(n - std::accumulate(sizes.begin(), sizes.end(), 0LL));
    }
    std::vector<std::size_t> out;
    for (long long sz : sizes) {
        if (sz < 0) throw std::invalid_argument("model: k too small for the hole sizes");
        out.push_back(static_cast<std::size_t>(sz));
    }
    return out;
}

std::size_t ModelParams::min_k() const {
    for (std::size_t k = 0;; ++k) {
        try {
            block_sizes(k);
            return k;
        } catch (const std::invalid_argument &) {
            if (k > 1u << 20) throw;
        }
    }
}

chains::ChainType ModelParams::chain_type() const {
    switch (t.size()) {
        case 0: return chains::ChainType::A;
        case 1: return chains::ChainType::B;
        default: return chains::ChainType::C;
    }
}

chains::ChainSpec ModelParams::chain_spec(int truncation) const {
    return {chain_type(), r, t, truncation};
}

namespace {

// Block index of a matrix index, given the block offsets.
std::size_t block_of(const std::vector<std::size_t> &offsets, std::size_t i) {
    std::size_t b = 0;
    while (b + 1 < offsets.size() && i >= offsets[b + 1]) ++b;
    return b;
}

std::vector<std::size_t> offsets_of(const std::vector<std::size_t> &sizes) {
    std::vector<std::size_t> off = {0};
    for (std::size_t sz : sizes) off.push_back(off.back() + sz);
    off.pop_back();
    return off;
}

// Entry (i, j) is forced to zero iff both indices lie in the same hole block.
bool forced_zero(const ModelParams &params, const std::vector<std::size_t> &offsets,
                 std::size_t i, std::size_t j) {
    const std::size_t bi = block_of(offsets, i);
    return bi < params.s() && bi == block_of(offsets, j);
}

}  // namespace

gf2::BitMatrix sample_model(const ModelParams &params, std::size_t k, CounterRng &rng) {
    const auto sizes = params.block_sizes(k);
    const auto offsets = offsets_of(sizes);
    const std::size_t n = params.size(k);
    gf2::BitMatrix B(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (forced_zero(params, offsets, i, j)) continue;
            if (rng.next_bit()) {
                B.set(i, j, true);
                B.set(j, i, true);
            }
        }
    }
    return B;
}

RefinedCorank refined_corank(const gf2::BitMatrix &B, const ModelParams &params, std::size_t k) {
    const auto sizes = params.block_sizes(k);
    const auto offsets = offsets_of(sizes);
    const std::size_t n = params.size(k);
    if (B.rows() != n || B.cols() != n) throw std::invalid_argument("refined_corank: size mismatch");
    RefinedCorank rc;
    {
        gf2::BitMatrix copy = B;
        rc.m = static_cast<int>(n - gf2::rank_inplace(copy));
    }
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    int *slots[2] = {&rc.m1, &rc.m2};
    for (std::size_t j = 0; j < params.s(); ++j) {
        std::vector<std::size_t> cols(sizes[j]);
        std::iota(cols.begin(), cols.end(), offsets[j]);
        gf2::BitMatrix pillar = B.submatrix(all_rows, cols);
        *slots[j] = static_cast<int>(sizes[j] - gf2::rank_inplace(pillar));
    }
    return rc;
}

gf2::BitMatrix extend_model(const gf2::BitMatrix &B, const ModelParams &params, std::size_t k,
                            CounterRng &rng) {
    const auto old_sizes = params.block_sizes(k);
    const auto new_sizes = params.block_sizes(k + 1);
    const auto new_offsets = offsets_of(new_sizes);
    const std::size_t n_new = params.size(k + 1);
    // Map old indices to new positions: each block keeps its top-left corner,
    // growing blocks gain their last index.
    std::vector<std::size_t> old_to_new;
    std::vector<std::size_t> fresh;
    for (std::size_t b = 0; b < old_sizes.size(); ++b) {
        for (std::size_t i = 0; i < old_sizes[b]; ++i) old_to_new.push_back(new_offsets[b] + i);
        for (std::size_t i = old_sizes[b]; i < new_sizes[b]; ++i)
            fresh.push_back(new_offsets[b] + i);
    }
    gf2::BitMatrix out(n_new, n_new);
    for (std::size_t i = 0; i < B.rows(); ++i)
        for (std::size_t j = 0; j < B.cols(); ++j)
            if (B.get(i, j)) out.set(old_to_new[i], old_to_new[j], true);
    for (std::size_t idx = 0; idx < fresh.size(); ++idx) {
        const std::size_t i = fresh[idx];
        for (std::size_t j = 0; j < n_new; ++j) {
            if (j == i) continue;
            // Entries between two fresh indices are drawn once (i < j order).
            bool j_fresh = false;
            for (std::size_t l = idx + 1; l < fresh.size(); ++l) j_fresh |= fresh[l] == j;
            if (!j_fresh) {
                bool seen = false;
                for (std::size_t l = 0; l < idx; ++l) seen |= fresh[l] == j;
                if (seen) continue;  // already drawn from the earlier fresh index
            }
            if (forced_zero(params, new_offsets, i, j)) continue;
            if (rng.next_bit()) {
                out.set(i, j, true);
                out.set(j, i, true);
            }
        }
    }
    return out;
}

gf2::BitMatrix project_model(const gf2::BitMatrix &B, const ModelParams &params, std::size_t k) {
    if (k == 0) throw std::invalid_argument("project_model: nothing below k = 0");
    const auto sizes = params.block_sizes(k);
    const auto small = params.block_sizes(k - 1);
    const auto offsets = offsets_of(sizes);
    std::vector<std::size_t> keep;
    for (std::size_t b = 0; b < sizes.size(); ++b)
        for (std::size_t i = 0; i < small[b]; ++i) keep.push_back(offsets[b] + i);
    return B.submatrix(keep, keep);
}

double McHistogram::freq(const chains::State &st) const {
    auto it = counts.find(st);
    return it == counts.end() || samples == 0
               ? 0.0
               : static_cast<double>(it->second) / static_cast<double>(samples);
}

double McHistogram::stderr_of(const chains::State &st) const {
    if (samples == 0) return 0.0;
    const double p = freq(st);
    return std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(samples));
}

std::map<int, std::uint64_t> McHistogram::marginal_m() const {
    std::map<int, std::uint64_t> out;
    for (const auto &[st, c] : counts) out[st.m] += c;
    return out;
}

std::string McHistogram::to_csv() const {
    std::ostringstream os;
    os << "m,m1,m2,count,freq,stderr\n";
    for (const auto &[st, c] : counts)
        os << st.m << ',' << st.m1 << ',' << st.m2 << ',' << c << ',' << freq(st) << ','
           << stderr_of(st) << '\n';
    return os.str();
}

McHistogram mc_distribution(const ModelParams &params, std::size_t k, std::uint64_t samples,
                            std::uint64_t seed, unsigned jobs) {
    params.validate();
    if (jobs == 0) jobs = 1;
    std::vector<McHistogram> parts(jobs);
    auto work = [&](unsigned shard) {
        CounterRng rng(seed, shard);
        std::uint64_t n = samples / jobs + (shard < samples % jobs ? 1 : 0);
        for (std::uint64_t i = 0; i < n; ++i) {
            gf2::BitMatrix B = sample_model(params, k, rng);
            parts[shard].counts[refined_corank(B, params, k).to_state()]++;
        }
        parts[shard].samples = n;
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (unsigned s = 0; s < jobs; ++s) threads.emplace_back(work, s);
        for (auto &th : threads) th.join();
    }
    McHistogram total;
    for (const auto &part : parts) {
        total.samples += part.samples;
        for (const auto &[st, c] : part.counts) total.counts[st] += c;
    }
    return total;
}

chains::StepSampler model_step_sampler(const ModelParams &params, std::size_t k) {
    params.validate();
    return [params, k](CounterRng &rng) {
        gf2::BitMatrix B = sample_model(params, k, rng);
        chains::State from = refined_corank(B, params, k).to_state();
        gf2::BitMatrix B2 = extend_model(B, params, k, rng);
        chains::State to = refined_corank(B2, params, k + 1).to_state();
        return std::make_pair(from, to);
    };
}

}  // namespace selmerlab::model
