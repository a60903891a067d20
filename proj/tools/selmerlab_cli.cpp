// selmerlab: single-binary front end over the library modules.
//
// Subcommands: classify, param, selmer, density, model-sim, markov-eq,
// moments, chain-validate, drift.  Every subcommand emits one JSON document
// on stdout (field order fixed, so identical configurations and seeds give
// byte-identical output) and optionally a CSV file.  Numeric payloads carry
// a "mode" tag: "exact" for rational/integer results, "float" otherwise.
//
// Exit codes: 0 success; 1 internal failure (a computation contradicted its
// own invariants); 2 usage error (unknown flags, inadmissible parameters).
//
// SELMERLAB_CACHE (or --cache) points at a directory holding append-only
// per-class files of enumeration results with per-record checksums; the
// cache is purely an optimization and corrupt records are ignored.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "selmerlab/arith.hpp"
#include "selmerlab/chains.hpp"
#include "selmerlab/descent.hpp"
#include "selmerlab/experiments.hpp"
#include "selmerlab/model.hpp"
#include "selmerlab/moments.hpp"
#include "selmerlab/redei.hpp"

using json = nlohmann::ordered_json;
using namespace selmerlab;

namespace {

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

std::string rational_str(const chains::Rational &q) {
    std::ostringstream os;
    if (boost::multiprecision::denominator(q) == 1)
        os << boost::multiprecision::numerator(q);
    else
        os << q;
    return os.str();
}

char type_letter(chains::ChainType t) { return "ABC"[static_cast<int>(t)]; }
char type_letter(redei::FamilyType t) { return "ABC"[static_cast<int>(t)]; }

chains::ChainType parse_type(const std::string &s) {
    if (s == "A" || s == "a") return chains::ChainType::A;
    if (s == "B" || s == "b") return chains::ChainType::B;
    if (s == "C" || s == "c") return chains::ChainType::C;
    throw CLI::ValidationError("--type", "expected A, B or C");
}

std::vector<std::uint8_t> parse_bits(const std::string &text) {
    std::vector<std::uint8_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item != "0" && item != "1")
            throw CLI::ValidationError("--s", "expected a comma list of 0/1");
        out.push_back(item == "1" ? 1 : 0);
    }
    return out;
}

json state_json(const chains::State &st) {
    return json{{"m", st.m}, {"m1", st.m1}, {"m2", st.m2}};
}

void write_file(const std::string &path, const std::string &content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CLI::ValidationError("--csv", "cannot open " + path);
    os << content;
}

void emit(const json &j, const std::string &out_path) {
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_file(out_path, text);
    }
}

std::uint64_t fnv1a64(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Class construction from flags
// ---------------------------------------------------------------------------

struct ClassFlags {
    long long e1 = 0, e2 = 0;
    std::string sigma_text;  // empty: minimal place set of the family
    long long q_rep = 1;
    std::string s_text;      // empty unless given
    std::string class_spec;  // "auto" enumerates all sign refinements

    void add_to(CLI::App *cmd, bool with_spec) {
        cmd->add_option("--e1", e1, "Family parameter e1")->required();
        cmd->add_option("--e2", e2, "Family parameter e2")->required();
        cmd->add_option("--sigma", sigma_text,
                        "Place set, e.g. -1,2,3 (default: minimal for the family)");
        cmd->add_option("--q", q_rep, "Square class representative supported on sigma");
        cmd->add_option("--s", s_text, "Sign vector over the sigma generators, e.g. 0,1,0");
        if (with_spec)
            cmd->add_option("--class-spec", class_spec,
                            "'auto' enumerates every sign refinement of the class");
    }

    descent::CurveFamily family() const { return descent::CurveFamily(e1, e2); }

    arith::PlaceSet sigma() const {
        return sigma_text.empty() ? family().sigma0() : arith::PlaceSet::parse(sigma_text);
    }

    std::vector<descent::TwistClass> build() const {
        const descent::CurveFamily fam = family();
        const arith::PlaceSet sig = sigma();
        const arith::SquareClass q = arith::square_class_of(q_rep, sig);
        std::vector<descent::TwistClass> out;
        if (class_spec == "auto") {
            if (!s_text.empty())
                throw CLI::ValidationError("--class-spec", "auto excludes an explicit --s");
            const std::size_t g = sig.num_generators();
            for (std::uint32_t mask = 0; mask < (1u << g); ++mask) {
                std::vector<std::uint8_t> s(g);
                for (std::size_t i = 0; i < g; ++i) s[i] = (mask >> i) & 1u;
                out.emplace_back(fam, sig, q, std::move(s));
            }
        } else if (!class_spec.empty()) {
            throw CLI::ValidationError("--class-spec", "only 'auto' is recognized");
        } else {
            std::vector<std::uint8_t> s =
                s_text.empty() ? std::vector<std::uint8_t>(sig.num_generators(), 0)
                               : parse_bits(s_text);
            if (s.size() != sig.num_generators())
                throw CLI::ValidationError("--s", "length must match the sigma generators");
            out.emplace_back(fam, sig, q, std::move(s));
        }
        return out;
    }
};

struct ChainFlags {
    std::string type_text = "A";
    int r = 0;
    std::optional<int> t1, t2;
    int truncation = 40;

    void add_to(CLI::App *cmd) {
        cmd->add_option("--type", type_text, "Chain type: A, B or C")->required();
        cmd->add_option("--r", r, "Corank parity (0 or 1)");
        cmd->add_option("--t1", t1, "First hole parameter");
        cmd->add_option("--t2", t2, "Second hole parameter");
        cmd->add_option("--truncation", truncation, "State-space truncation in m");
    }

    std::vector<int> holes() const {
        const chains::ChainType ty = parse_type(type_text);
        std::vector<int> t;
        if (ty != chains::ChainType::A) {
            if (!t1) throw CLI::ValidationError("--t1", "required for types B and C");
            t.push_back(*t1);
        }
        if (ty == chains::ChainType::C) {
            if (!t2) throw CLI::ValidationError("--t2", "required for type C");
            t.push_back(*t2);
        }
        return t;
    }

    chains::ChainSpec spec() const {
        chains::ChainSpec sp{parse_type(type_text), r, holes(), truncation};
        sp.validate();
        return sp;
    }
};

// ---------------------------------------------------------------------------
// Enumeration cache (append-only, per-record checksum)
// ---------------------------------------------------------------------------

class SelmerCache {
  public:
    SelmerCache(const std::string &dir, const descent::CurveFamily &fam,
                const arith::PlaceSet &sigma) {
        if (dir.empty()) return;
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        std::ostringstream key;
        key << fam.e1 << "|" << fam.e2 << "|" << sigma.to_string();
        std::ostringstream name;
        name << dir << "/selmer-" << std::hex << fnv1a64(key.str()) << ".cache";
        path_ = name.str();
        load();
    }

    bool enabled() const { return !path_.empty(); }

    std::optional<descent::SelmerDims> lookup(long long m) const {
        auto it = records_.find(m);
        if (it == records_.end()) return std::nullopt;
        return it->second;
    }

    void store(long long m, const descent::SelmerDims &d) {
        if (!enabled() || records_.count(m)) return;
        records_.emplace(m, d);
        std::ofstream os(path_, std::ios::app);
        if (!os) return;  // cache failures are never fatal
        const std::string body = serialize(m, d);
        os << body << " " << std::hex << fnv1a64(body) << "\n";
    }

  private:
    static std::string serialize(long long m, const descent::SelmerDims &d) {
        std::ostringstream os;
        os << m << " " << d.sel2 << " " << d.essential;
        for (int v : d.strict) os << " " << v;
        for (int v : d.strict_essential) os << " " << v;
        for (int v : d.modified) os << " " << v;
        for (int v : d.modified_essential) os << " " << v;
        return os.str();
    }

    void load() {
        std::ifstream is(path_);
        std::string line;
        while (std::getline(is, line)) {
            const auto pos = line.rfind(' ');
            if (pos == std::string::npos) continue;
            const std::string body = line.substr(0, pos);
            std::uint64_t crc = 0;
            try {
                crc = std::stoull(line.substr(pos + 1), nullptr, 16);
            } catch (const std::exception &) {
                continue;
            }
            if (crc != fnv1a64(body)) continue;  // corrupt record: skip
            std::istringstream fields(body);
            long long m = 0;
            descent::SelmerDims d;
            fields >> m >> d.sel2 >> d.essential;
            for (int &v : d.strict) fields >> v;
            for (int &v : d.strict_essential) fields >> v;
            for (int &v : d.modified) fields >> v;
            for (int &v : d.modified_essential) fields >> v;
            if (fields) records_.emplace(m, d);
        }
    }

    std::string path_;
    std::map<long long, descent::SelmerDims> records_;
};

json dims_json(const descent::SelmerDims &d) {
    json j;
    j["sel2"] = d.sel2;
    j["essential"] = d.essential;
    j["strict"] = d.strict;
    j["strict_essential"] = d.strict_essential;
    j["modified"] = d.modified;
    j["modified_essential"] = d.modified_essential;
    return j;
}

// Splits a square-free twist m into its sigma square class and the
// prime-to-sigma part n with factorization; throws on non-square-free input.
struct TwistSplit {
    arith::SquareClass q;
    long long n = 1;
    std::vector<std::uint32_t> factors;
};

TwistSplit split_twist(long long m, const arith::PlaceSet &sigma) {
    if (m == 0) throw CLI::ValidationError("--m", "twist must be nonzero");
    TwistSplit out;
    if (m < 0) {
        out.q.set(0, true);
        m = -m;
    }
    for (std::size_t i = 1; i < sigma.num_generators(); ++i) {
        const long long p = sigma.generator(i);
        if (m % p == 0) {
            out.q.set(i, true);
            m /= p;
            if (m % p == 0) throw CLI::ValidationError("--m", "twist must be square-free");
        }
    }
    for (long long p = 2; p * p <= m; ++p) {
        if (m % p != 0) continue;
        m /= p;
        if (m % p == 0) throw CLI::ValidationError("--m", "twist must be square-free");
        out.factors.push_back(static_cast<std::uint32_t>(p));
        out.n *= p;
    }
    if (m > 1) {
        if (m > std::numeric_limits<std::uint32_t>::max())
            throw CLI::ValidationError("--m", "prime factor out of range");
        out.factors.push_back(static_cast<std::uint32_t>(m));
        out.n *= m;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand runners
// ---------------------------------------------------------------------------

struct CommonFlags {
    unsigned jobs = 1;
    std::string csv_path;
    std::string out_path;
    std::string cache_dir;

    void add_to(CLI::App *cmd, bool with_csv = false) {
        cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--out", out_path, "Write the JSON document here instead of stdout");
        if (with_csv) cmd->add_option("--csv", csv_path, "Also write a CSV table to this path");
    }

    std::string cache() const {
        if (!cache_dir.empty()) return cache_dir;
        const char *env = std::getenv("SELMERLAB_CACHE");
        return env ? env : "";
    }
};

int run_classify(const ClassFlags &cf, const CommonFlags &common) {
    const redei::FamilyClass fc = cf.family().classify();
    json j;
    j["schema"] = "classify/1";
    j["mode"] = "exact";
    j["type"] = std::string(1, type_letter(fc.type));
    j["d"] = fc.d;
    j["squares"] = fc.is_square;
    emit(j, common.out_path);
    return 0;
}

json class_json(const descent::TwistClass &cls) {
    json j;
    j["e1"] = cls.family().e1;
    j["e2"] = cls.family().e2;
    j["sigma"] = cls.sigma().to_string();
    j["q"] = arith::representative(cls.q(), cls.sigma());
    j["s"] = cls.s();
    return j;
}

int run_param(const ClassFlags &cf, const CommonFlags &common) {
    json reports = json::array();
    for (const descent::TwistClass &cls : cf.build()) {
        json j;
        j["schema"] = "param/1";
        j["mode"] = "exact";
        j["class"] = class_json(cls);
        j["type"] = std::string(1, type_letter(cls.type()));
        j["r"] = cls.r();
        j["holes"] = cls.holes();
        j["t"] = descent::parameter(cls);
        j["t_x"] = cls.t_x();
        reports.push_back(std::move(j));
    }
    if (reports.size() == 1) {
        emit(reports[0], common.out_path);
    } else {
        json j;
        j["schema"] = "param-set/1";
        j["mode"] = "exact";
        j["reports"] = std::move(reports);
        emit(j, common.out_path);
    }
    return 0;
}

int run_selmer(const ClassFlags &cf, long long m, bool oracle, const CommonFlags &common) {
    const descent::CurveFamily fam = cf.family();
    const arith::PlaceSet sigma = cf.sigma();
    json j;
    j["schema"] = "selmer/1";
    j["mode"] = "exact";
    j["e1"] = fam.e1;
    j["e2"] = fam.e2;
    j["sigma"] = sigma.to_string();
    j["m"] = m;
    if (oracle) {
        SelmerCache cache(common.cache(), fam, sigma);
        j["method"] = "oracle";
        if (auto hit = cache.lookup(m)) {
            j["dims"] = dims_json(*hit);
            j["cached"] = true;
        } else {
            const descent::SelmerData data = descent::selmer_oracle(fam, m, sigma);
            cache.store(m, data.dims);
            j["dims"] = dims_json(data.dims);
            j["cached"] = false;
            j["num_elements"] = data.members.size();
            j["generators"] = data.s_generators;
        }
    } else {
        const TwistSplit split = split_twist(m, sigma);
        const std::vector<std::uint8_t> s = arith::symbol_vector(split.factors, sigma);
        const descent::TwistClass cls(fam, sigma, split.q, s);
        j["method"] = "matrix";
        j["n"] = split.n;
        j["dims"] = dims_json(descent::build_kernel_matrices(cls, split.n).dims(cls));
    }
    emit(j, common.out_path);
    return 0;
}

json density_json(const experiments::DensityReport &rep) { return json::parse(rep.to_json()); }

int run_density_cmd(const ClassFlags &cf, std::uint64_t max_n, bool essential, bool oracle,
                    std::optional<unsigned> xi, const CommonFlags &common) {
    const experiments::DimMode mode =
        oracle ? experiments::DimMode::Oracle : experiments::DimMode::Matrix;
    json reports = json::array();
    std::string csv;
    for (const descent::TwistClass &cls : cf.build()) {
        if (xi) {
            const experiments::AverageReport avg =
                experiments::run_average(cls, max_n, *xi, essential, common.jobs);
            reports.push_back(json::parse(avg.to_json()));
        } else {
            const experiments::DensityReport rep =
                experiments::run_density(cls, max_n, mode, essential, common.jobs);
            reports.push_back(density_json(rep));
            csv += rep.to_csv();
        }
    }
    if (!common.csv_path.empty() && !csv.empty()) write_file(common.csv_path, csv);
    if (reports.size() == 1) {
        emit(reports[0], common.out_path);
    } else {
        json j;
        j["schema"] = xi ? "average-run/1" : "density-run/1";
        j["mode"] = "float";
        j["reports"] = std::move(reports);
        emit(j, common.out_path);
    }
    return 0;
}

int run_model_sim(const ChainFlags &ch, std::size_t k, std::uint64_t samples, std::uint64_t seed,
                  const CommonFlags &common) {
    const model::ModelParams params{ch.r, ch.holes()};
    params.validate();
    const model::McHistogram hist = model::mc_distribution(params, k, samples, seed, common.jobs);
    json j;
    j["schema"] = "model-sim/1";
    j["mode"] = "float";
    j["type"] = std::string(1, type_letter(params.chain_type()));
    j["r"] = params.r;
    j["t"] = params.t;
    j["k"] = k;
    j["samples"] = hist.samples;
    j["seed"] = seed;
    json states = json::array();
    for (const auto &[st, c] : hist.counts) {
        json e = state_json(st);
        e["count"] = c;
        e["freq"] = hist.freq(st);
        states.push_back(std::move(e));
    }
    j["states"] = std::move(states);
    json marg;
    for (const auto &[mval, c] : hist.marginal_m()) marg[std::to_string(mval)] = c;
    j["marginal_m"] = std::move(marg);
    if (!common.csv_path.empty()) write_file(common.csv_path, hist.to_csv());
    emit(j, common.out_path);
    return 0;
}

int run_markov_eq(const ChainFlags &ch, bool use_power, double tol, const CommonFlags &common) {
    const chains::ChainSpec spec = ch.spec();
    json j;
    j["schema"] = "markov-eq/1";
    j["mode"] = "float";
    j["type"] = std::string(1, type_letter(spec.type));
    j["r"] = spec.r;
    j["t"] = spec.t;
    j["truncation"] = spec.truncation;
    chains::Distribution dist;
    if (use_power) {
        const chains::PowerIterationResult res = chains::equilibrium_power(spec, tol);
        j["method"] = "power";
        j["tol"] = tol;
        j["achieved_tv"] = res.achieved_tv;
        j["leakage"] = res.leakage;
        j["iterations"] = res.iterations;
        j["converged"] = res.converged;
        dist = res.dist;
    } else {
        j["method"] = "closed";
        dist = chains::equilibrium_closed(spec);
    }
    json states = json::array();
    for (const auto &[st, p] : dist.p) {
        json e = state_json(st);
        e["p"] = p;
        states.push_back(std::move(e));
    }
    j["states"] = std::move(states);
    if (!common.csv_path.empty()) write_file(common.csv_path, chains::transition_table_csv(spec));
    emit(j, common.out_path);
    return 0;
}

int run_moments(const ChainFlags &ch, unsigned xi, bool exact, const CommonFlags &common) {
    const moments::GenFnSpec spec{parse_type(ch.type_text), ch.r, ch.holes()};
    spec.validate();
    const chains::Rational value = moments::moment(spec, xi);
    json j;
    j["schema"] = "moments/1";
    j["type"] = std::string(1, type_letter(spec.type));
    j["r"] = spec.t;
    j["t"] = spec.tt;
    j["xi"] = xi;
    if (exact) {
        j["mode"] = "exact";
        j["value"] = rational_str(value);
    } else {
        j["mode"] = "float";
        j["value"] = static_cast<double>(value);
    }
    emit(j, common.out_path);
    return 0;
}

json validation_json(const chains::ValidationReport &rep) {
    json j;
    j["samples"] = rep.samples;
    j["forbidden_jumps"] = rep.forbidden_jumps;
    j["max_deviation"] = rep.max_deviation;
    j["min_source_count"] = rep.min_source_count;
    json trans = json::array();
    for (const chains::TransitionDeviation &d : rep.transitions) {
        json e;
        e["from"] = state_json(d.from);
        e["to"] = state_json(d.to);
        e["empirical"] = d.empirical;
        e["expected"] = d.expected;
        e["stderr"] = d.stderr_binomial;
        e["sources"] = d.source_count;
        trans.push_back(std::move(e));
    }
    j["transitions"] = std::move(trans);
    json excl = json::array();
    for (const chains::State &st : rep.excluded_sources) excl.push_back(state_json(st));
    j["excluded_sources"] = std::move(excl);
    return j;
}

int run_chain_validate(const std::string &source, const ChainFlags &ch, const ClassFlags &cf,
                       bool have_class, std::size_t k, std::uint64_t samples, std::uint64_t seed,
                       std::uint64_t min_source, const CommonFlags &common) {
    chains::ChainSpec spec;
    chains::StepSampler sampler;
    json head;
    if (source == "model") {
        const model::ModelParams params{ch.r, ch.holes()};
        params.validate();
        spec = params.chain_spec(ch.truncation);
        sampler = model::model_step_sampler(params, k);
        head["source"] = "model";
    } else if (source == "redei") {
        if (!have_class)
            throw CLI::ValidationError("--e1", "the redei source needs a twist class");
        const std::vector<descent::TwistClass> classes = cf.build();
        if (classes.size() != 1)
            throw CLI::ValidationError("--class-spec", "the redei source needs a single class");
        spec = descent::class_chain_spec(classes.front(), ch.truncation);
        sampler = descent::class_step_sampler(classes.front(), k);
        head["source"] = "redei";
        head["class"] = class_json(classes.front());
    } else {
        throw CLI::ValidationError("--source", "expected 'model' or 'redei'");
    }
    const chains::ValidationReport rep =
        chains::chain_validate(spec, sampler, samples, seed, min_source, common.jobs);
    json j;
    j["schema"] = "chain-validate/1";
    j["mode"] = "float";
    for (auto &[key, val] : head.items()) j[key] = val;
    j["type"] = std::string(1, type_letter(spec.type));
    j["r"] = spec.r;
    j["t"] = spec.t;
    j["k"] = k;
    j["seed"] = seed;
    j["report"] = validation_json(rep);
    emit(j, common.out_path);
    return 0;
}

int run_drift(const ChainFlags &ch, int xi, const CommonFlags &common) {
    const chains::ChainSpec spec = ch.spec();
    const chains::DriftReport rep = chains::check_drift(spec, xi);
    json j;
    j["schema"] = "drift/1";
    j["mode"] = "float";
    j["type"] = std::string(1, type_letter(spec.type));
    j["r"] = spec.r;
    j["t"] = spec.t;
    j["xi"] = xi;
    j["lambda_sup"] = rep.lambda_sup;
    j["threshold_m"] = rep.threshold_m;
    j["driftable"] = rep.driftable;
    json wit = json::array();
    for (const chains::State &st : rep.witnesses) wit.push_back(state_json(st));
    j["witnesses"] = std::move(wit);
    emit(j, common.out_path);
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Computational laboratory for 2-Selmer groups of quadratic twists"};
    app.require_subcommand(1);

    ClassFlags classify_cf;
    CommonFlags classify_common;
    CLI::App *classify = app.add_subcommand("classify", "Classify a twist family");
    classify->add_option("--e1", classify_cf.e1, "Family parameter e1")->required();
    classify->add_option("--e2", classify_cf.e2, "Family parameter e2")->required();
    classify_common.add_to(classify);

    ClassFlags param_cf;
    CommonFlags param_common;
    CLI::App *param = app.add_subcommand("param", "Class parameter t and hole structure");
    param_cf.add_to(param, /*with_spec=*/true);
    param_common.add_to(param);

    ClassFlags selmer_cf;
    CommonFlags selmer_common;
    long long selmer_m = 0;
    bool selmer_oracle_flag = false;
    CLI::App *selmer = app.add_subcommand("selmer", "Selmer dimensions of a single twist");
    selmer->add_option("--e1", selmer_cf.e1, "Family parameter e1")->required();
    selmer->add_option("--e2", selmer_cf.e2, "Family parameter e2")->required();
    selmer->add_option("--sigma", selmer_cf.sigma_text, "Place set (default: minimal)");
    selmer->add_option("--m", selmer_m, "Square-free twist")->required();
    selmer->add_flag("--oracle", selmer_oracle_flag, "Use the enumeration oracle");
    selmer->add_option("--cache", selmer_common.cache_dir, "Cache directory for oracle results");
    selmer_common.add_to(selmer);

    ClassFlags density_cf;
    CommonFlags density_common;
    std::uint64_t density_max_n = 0;
    bool density_essential = false, density_oracle = false;
    std::optional<unsigned> density_xi;
    CLI::App *density = app.add_subcommand("density", "Dimension densities over a class");
    density_cf.add_to(density, /*with_spec=*/true);
    density->add_option("--max-n", density_max_n, "Sieve bound")->required();
    density->add_flag("--essential", density_essential, "Keep only typical omega(n)");
    density->add_flag("--oracle", density_oracle, "Enumeration oracle per twist (slow)");
    density->add_option("--xi", density_xi, "Report the average of (#S)^xi instead");
    density_common.add_to(density, /*with_csv=*/true);

    ChainFlags msim_ch;
    CommonFlags msim_common;
    std::size_t msim_k = 20;
    std::uint64_t msim_samples = 100000, msim_seed = 1;
    CLI::App *msim = app.add_subcommand("model-sim", "Monte Carlo over the matrix model");
    msim_ch.add_to(msim);
    msim->add_option("--k", msim_k, "Model level")->required();
    msim->add_option("--samples", msim_samples, "Sample count")->required();
    msim->add_option("--seed", msim_seed, "Counter-based seed")->required();
    msim_common.add_to(msim, /*with_csv=*/true);

    ChainFlags meq_ch;
    CommonFlags meq_common;
    bool meq_closed = false, meq_power = false;
    double meq_tol = 1e-12;
    CLI::App *meq = app.add_subcommand("markov-eq", "Equilibrium of the corank chain");
    meq_ch.add_to(meq);
    meq->add_flag("--closed", meq_closed, "Closed-form equilibrium (default)");
    meq->add_flag("--power", meq_power, "Power iteration");
    meq->add_option("--tol", meq_tol, "Power-iteration tolerance");
    meq_common.add_to(meq, /*with_csv=*/true);

    ChainFlags mom_ch;
    CommonFlags mom_common;
    unsigned mom_xi = 1;
    bool mom_exact = false;
    CLI::App *mom = app.add_subcommand("moments", "Moments of the limit corank law");
    mom_ch.add_to(mom);
    mom->add_option("--xi", mom_xi, "Moment order")->required();
    mom->add_flag("--exact", mom_exact, "Exact rational output");
    mom_common.add_to(mom);

    ChainFlags cv_ch;
    ClassFlags cv_cf;
    CommonFlags cv_common;
    std::string cv_source = "model";
    std::size_t cv_k = 12;
    std::uint64_t cv_samples = 100000, cv_seed = 1, cv_min_source = 10000;
    CLI::App *cv = app.add_subcommand("chain-validate", "Empirical transitions vs exact tables");
    cv->add_option("--source", cv_source, "Step source: model | redei")->required();
    cv->add_option("--type", cv_ch.type_text, "Chain type (model source)");
    cv->add_option("--r", cv_ch.r, "Corank parity (model source)");
    cv->add_option("--t1", cv_ch.t1, "First hole parameter (model source)");
    cv->add_option("--t2", cv_ch.t2, "Second hole parameter (model source)");
    cv->add_option("--truncation", cv_ch.truncation, "State-space truncation");
    CLI::Option *cv_e1 = cv->add_option("--e1", cv_cf.e1, "Family parameter e1 (redei source)");
    cv->add_option("--e2", cv_cf.e2, "Family parameter e2 (redei source)")->needs(cv_e1);
    cv->add_option("--sigma", cv_cf.sigma_text, "Place set (redei source)");
    cv->add_option("--q", cv_cf.q_rep, "Square class representative (redei source)");
    cv->add_option("--s", cv_cf.s_text, "Sign vector (redei source)");
    cv->add_option("--k", cv_k, "Chain level")->required();
    cv->add_option("--samples", cv_samples, "Observed steps")->required();
    cv->add_option("--seed", cv_seed, "Counter-based seed");
    cv->add_option("--min-source", cv_min_source, "Minimum visits per source state");
    cv_common.add_to(cv);

    ChainFlags drift_ch;
    CommonFlags drift_common;
    int drift_xi = 1;
    CLI::App *drift = app.add_subcommand("drift", "Drift diagnostics for 2^(xi m)");
    drift_ch.add_to(drift);
    drift->add_option("--xi", drift_xi, "Lyapunov exponent weight")->required();
    drift_common.add_to(drift);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 2;
    }

    try {
        if (classify->parsed()) return run_classify(classify_cf, classify_common);
        if (param->parsed()) return run_param(param_cf, param_common);
        if (selmer->parsed())
            return run_selmer(selmer_cf, selmer_m, selmer_oracle_flag, selmer_common);
        if (density->parsed())
            return run_density_cmd(density_cf, density_max_n, density_essential, density_oracle,
                                   density_xi, density_common);
        if (msim->parsed())
            return run_model_sim(msim_ch, msim_k, msim_samples, msim_seed, msim_common);
        if (meq->parsed()) {
            if (meq_closed && meq_power)
                throw CLI::ValidationError("--power", "choose one of --closed / --power");
            return run_markov_eq(meq_ch, meq_power, meq_tol, meq_common);
        }
        if (mom->parsed()) return run_moments(mom_ch, mom_xi, mom_exact, mom_common);
        if (cv->parsed())
            return run_chain_validate(cv_source, cv_ch, cv_cf, cv_e1->count() > 0, cv_k,
                                      cv_samples, cv_seed, cv_min_source, cv_common);
        if (drift->parsed()) return run_drift(drift_ch, drift_xi, drift_common);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const CLI::ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
