#include "selmerlab/experiments.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "selmerlab/moments.hpp"

namespace selmerlab::experiments {

using boost::multiprecision::cpp_int;

namespace {

// The square-free sieve allocates 4 bytes per candidate.
constexpr std::uint64_t kSieveCapacity = 100'000'000ull;

chains::State state_of(const descent::SelmerDims &dims, const std::vector<std::size_t> &holes) {
    chains::State st;
    st.m = dims.essential;
    if (!holes.empty()) st.m1 = dims.modified_essential[holes[0]];
    if (holes.size() > 1) st.m2 = dims.modified_essential[holes[1]];
    return st;
}

struct Shard {
    std::map<chains::State, std::uint64_t> joint;
    std::array<std::map<int, std::uint64_t>, 3> phi;
};

void json_count_map(std::ostringstream &os, const std::map<int, std::uint64_t> &m) {
    os << '{';
    bool first = true;
    for (const auto &[d, c] : m) {
        os << (first ? "" : ",") << '"' << d << "\":" << c;
        first = false;
    }
    os << '}';
}

void json_double_map(std::ostringstream &os, const std::map<int, double> &m) {
    os << '{';
    bool first = true;
    for (const auto &[d, p] : m) {
        os << (first ? "" : ",") << '"' << d << "\":" << p;
        first = false;
    }
    os << '}';
}

}  // namespace

void DensityReport::merge_counts(const DensityReport &other) {
    if (class_desc != other.class_desc || mode != other.mode ||
        essential_window != other.essential_window)
        throw std::invalid_argument("experiments: merging incompatible reports");
    population += other.population;
    total += other.total;
    for (const auto &[st, c] : other.joint_counts) joint_counts[st] += c;
    for (std::size_t j = 0; j < 3; ++j)
        for (const auto &[d, c] : other.phi_counts[j]) phi_counts[j][d] += c;
    achieved_n = std::max(achieved_n, other.achieved_n);
    max_n = std::max(max_n, other.max_n);
}

namespace {

void finalize(DensityReport &rep, const descent::TwistClass &cls) {
    rep.dim_counts.clear();
    for (const auto &[st, c] : rep.joint_counts) rep.dim_counts[st.m] += c;

    chains::ChainSpec spec = descent::class_chain_spec(cls);
    rep.r = spec.r;
    rep.t = spec.t;
    rep.holes = cls.holes();

    chains::Distribution eq = chains::equilibrium_closed(spec);
    rep.model_alt.clear();
    for (const auto &[st, p] : eq.p) rep.model_alt[st.m] += p;

    // Per-direction rectangular law: the hole parameter where there is a
    // hole, the point mass at zero otherwise.
    int max_phi = 1;
    for (std::size_t j = 0; j < 3; ++j)
        for (const auto &[d, c] : rep.phi_counts[j]) max_phi = std::max(max_phi, d + 1);
    for (std::size_t j = 0; j < 3; ++j) {
        int tj = chains::kMinusInfinity;
        for (std::size_t h = 0; h < rep.holes.size(); ++h)
            if (rep.holes[h] == j) tj = rep.t[h];
        rep.model_mat[j].assign(static_cast<std::size_t>(max_phi) + 1, 0.0);
        for (int d = 0; d <= max_phi; ++d)
            rep.model_mat[j][static_cast<std::size_t>(d)] = chains::pmat_closed(tj, d);
    }

    rep.l1_deviation = 0;
    if (rep.total > 0) {
        std::map<int, double> seen = rep.model_alt;
        for (const auto &[d, c] : rep.dim_counts) seen.try_emplace(d, 0.0);
        for (const auto &[d, p] : seen) {
            auto it = rep.dim_counts.find(d);
            const double emp =
                it == rep.dim_counts.end()
                    ? 0.0
                    : static_cast<double>(it->second) / static_cast<double>(rep.total);
            rep.l1_deviation += std::abs(emp - p);
        }
    }

    moments::GenFnSpec gspec{spec.type, spec.r, spec.t};
    for (unsigned xi = 0; xi <= 3; ++xi) {
        cpp_int sum = 0, sq = 0;
        for (const auto &[d, c] : rep.dim_counts) {
            const cpp_int w = cpp_int(1) << (xi * static_cast<unsigned>(d));
            sum += w * c;
            sq += w * w * c;
        }
        if (rep.total > 0) {
            const double n = static_cast<double>(rep.total);
            const double mean = static_cast<double>(sum) / n;
            const double second = static_cast<double>(sq) / n;
            rep.avg[xi] = mean;
            rep.avg_stderr[xi] =
                rep.total > 1 ? std::sqrt(std::max(second - mean * mean, 0.0) / n) : 0.0;
        }
        rep.avg_model[xi] = static_cast<double>(moments::moment(gspec, xi));
    }
}

}  // namespace

DensityReport run_density(const descent::TwistClass &cls, std::uint64_t max_n, DimMode mode,
                          bool essential_window, unsigned jobs) {
    if (max_n < 3) throw std::invalid_argument("experiments: max_n too small");
    if (jobs == 0) jobs = 1;
    DensityReport rep;
    rep.class_desc = cls.describe();
    rep.mode = mode == DimMode::Matrix ? "matrix" : "oracle";
    rep.max_n = max_n;
    rep.achieved_n = std::min(max_n, kSieveCapacity);
    rep.essential_window = essential_window;

    double lo = 0, hi = 1e18;
    if (essential_window) {
        const double w = std::log(std::log(static_cast<double>(rep.achieved_n)));
        if (!(w > 0)) throw std::invalid_argument("experiments: N too small for the window");
        lo = w - std::pow(w, 2.0 / 3.0);
        hi = w + std::pow(w, 2.0 / 3.0);
    }
    rep.window_lo = lo;
    rep.window_hi = hi;

    const std::vector<std::size_t> holes = cls.holes();

    // Stream the sieve into bounded batches and process each batch in
    // parallel; only counts are accumulated, so the result is independent of
    // the sharding.
    struct Item {
        std::uint64_t n;
        std::vector<std::uint32_t> factors;
    };
    std::vector<Item> batch;
    const std::size_t batch_size = 1 << 14;

    auto flush = [&]() {
        if (batch.empty()) return;
        const unsigned workers =
            static_cast<unsigned>(std::min<std::size_t>(jobs, batch.size()));
        std::vector<Shard> shards(workers);
        std::vector<std::exception_ptr> errors(workers);
        auto work = [&](unsigned w) {
            try {
                for (std::size_t i = w; i < batch.size(); i += workers) {
                    descent::SelmerDims dims;
                    if (mode == DimMode::Matrix) {
                        arith::OmegaPoint omega =
                            arith::omega_of(batch[i].n, batch[i].factors, cls.sigma());
                        dims = descent::build_kernel_matrices(cls, omega).dims(cls);
                    } else {
                        dims = descent::selmer_oracle(
                                   cls.family(), cls.m_of(static_cast<long long>(batch[i].n)),
                                   cls.sigma())
                                   .dims;
                    }
                    shards[w].joint[state_of(dims, holes)]++;
                    for (std::size_t j = 0; j < 3; ++j)
                        shards[w].phi[j][dims.modified_essential[j]]++;
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        };
        std::vector<std::thread> threads;
        for (unsigned w = 1; w < workers; ++w) threads.emplace_back(work, w);
        work(0);
        for (auto &th : threads) th.join();
        for (auto &err : errors)
            if (err) std::rethrow_exception(err);
        for (const Shard &sh : shards) {
            for (const auto &[st, c] : sh.joint) rep.joint_counts[st] += c;
            for (std::size_t j = 0; j < 3; ++j)
                for (const auto &[d, c] : sh.phi[j]) rep.phi_counts[j][d] += c;
        }
        rep.total += batch.size();
        batch.clear();
    };

    arith::sieve_squarefree(
        rep.achieved_n, cls.sigma(), cls.s(),
        [&](std::uint64_t n, const std::vector<std::uint32_t> &factors) {
            if (factors.empty()) return;
            ++rep.population;
            const double k = static_cast<double>(factors.size());
            if (essential_window && (k < lo || k > hi)) return;
            batch.push_back({n, factors});
            if (batch.size() >= batch_size) flush();
        });
    flush();

    finalize(rep, cls);
    return rep;
}

AverageReport run_average(const descent::TwistClass &cls, std::uint64_t max_n, unsigned xi,
                          bool essential_window, unsigned jobs) {
    if (xi > 3) throw std::invalid_argument("experiments: xi > 3 not supported");
    DensityReport density = run_density(cls, max_n, DimMode::Matrix, essential_window, jobs);
    AverageReport rep;
    rep.class_desc = density.class_desc;
    rep.max_n = density.max_n;
    rep.achieved_n = density.achieved_n;
    rep.total = density.total;
    rep.xi = xi;
    rep.essential_window = essential_window;
    rep.mean = density.avg[xi];
    rep.stderr_mean = density.avg_stderr[xi];
    rep.model_target = density.avg_model[xi];
    return rep;
}

std::string DensityReport::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"schema\":\"density-report/1\",\"class\":" << class_desc << ",\"mode\":\"" << mode
       << "\",\"max_n\":" << max_n << ",\"achieved_n\":" << achieved_n
       << ",\"essential_window\":" << (essential_window ? "true" : "false");
    if (essential_window) os << ",\"window\":[" << window_lo << ',' << window_hi << ']';
    os << ",\"population\":" << population << ",\"total\":" << total << ",\"r\":" << r
       << ",\"t\":[";
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
    os << "],\"holes\":[";
    for (std::size_t i = 0; i < holes.size(); ++i) os << (i ? "," : "") << holes[i];
    os << "],\"dim_counts\":";
    json_count_map(os, dim_counts);
    os << ",\"phi_counts\":[";
    for (std::size_t j = 0; j < 3; ++j) {
        if (j) os << ',';
        json_count_map(os, phi_counts[j]);
    }
    os << "],\"joint_counts\":[";
    bool first = true;
    for (const auto &[st, c] : joint_counts) {
        os << (first ? "" : ",") << "{\"m\":" << st.m << ",\"m1\":" << st.m1
           << ",\"m2\":" << st.m2 << ",\"count\":" << c << '}';
        first = false;
    }
    os << "],\"model_alt\":";
    json_double_map(os, model_alt);
    os << ",\"l1_deviation\":" << l1_deviation << ",\"averages\":[";
    for (unsigned xi = 0; xi <= 3; ++xi) {
        if (xi) os << ',';
        os << "{\"xi\":" << xi << ",\"mean\":" << avg[xi] << ",\"stderr\":" << avg_stderr[xi]
           << ",\"model\":" << avg_model[xi] << '}';
    }
    os << "]}";
    return os.str();
}

std::string DensityReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "m,m1,m2,count,freq\n";
    for (const auto &[st, c] : joint_counts)
        os << st.m << ',' << st.m1 << ',' << st.m2 << ',' << c << ','
           << (total ? static_cast<double>(c) / static_cast<double>(total) : 0.0) << '\n';
    return os.str();
}

std::string AverageReport::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"schema\":\"average-report/1\",\"class\":" << class_desc << ",\"max_n\":" << max_n
       << ",\"achieved_n\":" << achieved_n << ",\"total\":" << total << ",\"xi\":" << xi
       << ",\"essential_window\":" << (essential_window ? "true" : "false")
       << ",\"mean\":" << mean << ",\"stderr\":" << stderr_mean
       << ",\"model_target\":" << model_target << '}';
    return os.str();
}

}  // namespace selmerlab::experiments
