#include "selmerlab/descent.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace selmerlab::descent {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

namespace {

// ---------------------------------------------------------------------------
// Integer helpers
// ---------------------------------------------------------------------------

struct Factored {
    int sign = 1;                   // +1 or -1
    std::vector<long long> primes;  // ascending, squarefree part must be all of |x|
};

Factored factor_squarefree(long long x) {
    if (x == 0) throw std::invalid_argument("descent: zero is not a twist");
    Factored f;
    if (x < 0) {
        f.sign = -1;
        x = -x;
    }
    for (long long p = 2; p * p <= x; ++p) {
        if (x % p == 0) {
            x /= p;
            if (x % p == 0) throw std::invalid_argument("descent: twist is not square-free");
            f.primes.push_back(p);
        }
    }
    if (x > 1) f.primes.push_back(x);
    return f;
}

// Exponent-parity mask of x over an explicit generator list (-1, 2, odd
// primes); square leftovers are fine, other leftovers throw.
std::uint64_t class_mask(long long x, const std::vector<long long> &gens) {
    if (x == 0) throw std::invalid_argument("descent: square class of zero");
    std::uint64_t mask = 0;
    cpp_int v = x;
    if (v < 0) {
        v = -v;
        for (std::size_t i = 0; i < gens.size(); ++i)
            if (gens[i] == -1) mask ^= 1ull << i;
    }
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (gens[i] < 0) continue;
        int e = 0;
        while (v % gens[i] == 0) {
            v /= gens[i];
            ++e;
        }
        if (e & 1) mask ^= 1ull << i;
    }
    cpp_int root = sqrt(v);
    if (root * root != v)
        throw std::invalid_argument("descent: integer not supported on the generator list");
    return mask;
}

int valuation(cpp_int &v, long long p) {
    int e = 0;
    while (v % p == 0) {
        v /= p;
        ++e;
    }
    return e;
}

// Exact squareness of a nonzero rational in the completion at `place`.
bool is_local_square(const cpp_rational &g, arith::Place place) {
    if (g == 0) throw std::invalid_argument("descent: squareness of zero");
    if (place.is_infinity()) return g > 0;
    cpp_int num = numerator(g), den = denominator(g);
    const long long p = place.p;
    int v = valuation(num, p) - valuation(den, p);
    if (v & 1) return false;
    // num, den now coprime to p.
    if (place.is_two()) {
        long long o = static_cast<long long>(((num % 8) * (den % 8)) % 8);
        return ((o % 8) + 8) % 8 == 1;
    }
    long long u = static_cast<long long>(((num % p) * (den % p)) % p);
    u = ((u % p) + p) % p;
    return arith::legendre_additive(u, p) == 0;
}

// Local square class of a rational, cpp_int-safe.
arith::LocalSquareClass localize_big(cpp_rational x, arith::Place place) {
    cpp_int num = numerator(x), den = denominator(x);
    arith::LocalSquareClass out{place, 0};
    if (place.is_infinity()) {
        if (num < 0) out.coords = 1;
        return out;
    }
    const long long p = place.p;
    int v = valuation(num, p) - valuation(den, p);
    if (place.is_two()) {
        long long o = static_cast<long long>(((num % 8) * (den % 8)) % 8);
        o = ((o % 8) + 8) % 8;
        // Basis {-1, 2, 5}: -1 for o in {3,7}, 5 for o in {3,5}.
        if (o == 3 || o == 7) out.coords |= 1;
        if (v & 1) out.coords |= 2;
        if (o == 3 || o == 5) out.coords |= 4;
        return out;
    }
    long long u = static_cast<long long>(((num % p) * (den % p)) % p);
    u = ((u % p) + p) % p;
    if (arith::legendre_additive(u, p)) out.coords |= 1;
    if (v & 1) out.coords |= 2;
    return out;
}

// Packs the square-class pair (x, x - e1 m) of a point abscissa.
gf2::BitVec pack_pair(arith::LocalSquareClass c1, arith::LocalSquareClass c2) {
    const std::size_t d = c1.place.local_dim();
    gf2::BitVec v(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        if (c1.get(i)) v.set(i, true);
        if (c2.get(i)) v.set(d + i, true);
    }
    return v;
}

void add_to_span(std::vector<gf2::BitVec> &basis, const gf2::BitVec &v) {
    if (!v.is_zero() && !gf2::in_span(basis, v)) basis.push_back(v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Curve family
// ---------------------------------------------------------------------------

CurveFamily::CurveFamily(long long e1_, long long e2_) : e1(e1_), e2(e2_) {
    if (e1 == 0 || e2 == 0 || e1 == e2)
        throw std::invalid_argument("descent: need e1, e2, e1 - e2 all nonzero");
}

arith::PlaceSet CurveFamily::sigma0() const {
    const long long disc = 2 * e1 * e2 * (e1 - e2);
    std::set<long long> odd;
    long long x = std::abs(disc);
    for (long long p = 3; p * p <= x; p += 2)
        if (x % p == 0) {
            odd.insert(p);
            while (x % p == 0) x /= p;
        }
    while (x % 2 == 0) x /= 2;
    if (x > 1) odd.insert(x);
    return arith::PlaceSet(std::vector<long long>(odd.begin(), odd.end()));
}

// ---------------------------------------------------------------------------
// Local Kummer images
// ---------------------------------------------------------------------------

LocalImage kummer_image(const CurveFamily &family, long long m, arith::Place place) {
    if (m == 0) throw std::invalid_argument("descent: zero twist");
    const long long a = family.e1 * m, b = family.e2 * m;
    LocalImage out{place, place.is_infinity() ? 1u : (place.is_two() ? 3u : 2u), {}};

    auto add_x = [&](const cpp_rational &x) {
        add_to_span(out.basis,
                    pack_pair(localize_big(x, place), localize_big(x - a, place)));
    };
    // Torsion images (m-squared factors dropped).
    add_to_span(out.basis, pack_pair(localize_big(a, place),
                                     localize_big(family.e1 * (family.e1 - family.e2), place)));
    add_to_span(out.basis, pack_pair(localize_big(family.e1 * family.e2, place),
                                     localize_big(cpp_rational(-a), place)));

    if (place.is_infinity()) {
        std::array<long long, 3> roots{0, a, b};
        std::sort(roots.begin(), roots.end());
        add_x(cpp_rational(roots[0] + roots[1], 2));
        add_x(cpp_rational(roots[2] + 1));
        if (out.basis.size() != out.expected_dim)
            throw std::runtime_error("kummer_image: saturation failed at infinity");
        return out;
    }

    const long long p = place.p;
    for (int round = 0; round < 2 && out.basis.size() < out.expected_dim; ++round) {
        const int vrange = (place.is_two() ? 4 : 2) << round;
        const long long ubound = (place.is_two() ? 64 : 4 * p * p) << (2 * round);
        for (int v = -vrange; v <= vrange && out.basis.size() < out.expected_dim; ++v) {
            cpp_rational pv = v >= 0 ? cpp_rational(pow(cpp_int(p), v))
                                     : cpp_rational(1, pow(cpp_int(p), -v));
            for (long long u = 1; u <= ubound && out.basis.size() < out.expected_dim; ++u) {
                if (u % p == 0) continue;
                for (int sgn : {1, -1}) {
                    cpp_rational x = cpp_rational(sgn * u) * pv;
                    if (x == 0 || x == a || x == b) continue;
                    cpp_rational g = x * (x - a) * (x - b);
                    if (is_local_square(g, place)) add_x(x);
                }
            }
        }
    }
    if (out.basis.size() != out.expected_dim)
        throw std::runtime_error("kummer_image: saturation failed after escalation");
    return out;
}

// ---------------------------------------------------------------------------
// Selmer oracle
// ---------------------------------------------------------------------------

namespace {

// Span membership of small packed vectors as a bitmask over all 2^width
// values (width <= 6).
std::uint64_t span_membership_mask(const std::vector<gf2::BitVec> &basis, std::size_t width) {
    std::vector<std::uint64_t> gens;
    for (const auto &v : basis) {
        std::uint64_t g = 0;
        for (std::size_t i = 0; i < width; ++i)
            if (v.get(i)) g |= 1ull << i;
        gens.push_back(g);
    }
    std::uint64_t mask = 1;  // zero vector
    for (std::uint64_t g : gens) {
        std::uint64_t next = mask;
        for (std::uint64_t val = 0; val < (1ull << width); ++val)
            if ((mask >> val) & 1) next |= 1ull << (val ^ g);
        mask = next;
    }
    return mask;
}

int log2_exact(std::uint64_t count, const char *what) {
    int d = 0;
    while ((1ull << d) < count) ++d;
    if ((1ull << d) != count) throw std::runtime_error(std::string("descent: not a subgroup: ") + what);
    return d;
}

}  // namespace

SelmerData selmer_oracle(const CurveFamily &family, long long m, const arith::PlaceSet &sigma,
                         std::size_t cap) {
    // Split m into its sigma part and the primes outside sigma.
    Factored fm = factor_squarefree(m);
    std::vector<long long> sigma1;
    for (long long p : fm.primes)
        if (p != 2 && !sigma.contains_prime(p)) sigma1.push_back(p);
    SelmerData data;
    data.m = m;
    data.n = 1;
    for (long long p : sigma1) data.n *= p;

    // Generators of Q(S,2): the sigma generators then the primes of n.
    std::vector<long long> gens;
    for (std::size_t i = 0; i < sigma.num_generators(); ++i) gens.push_back(sigma.generator(i));
    for (long long p : sigma1) gens.push_back(p);
    data.s_generators = gens;
    const std::size_t G = gens.size();
    if (G > cap) throw std::invalid_argument("descent: oracle cap exceeded");

    // Places of S with localization tables and image membership masks.
    struct PlaceData {
        arith::Place place;
        std::size_t ldim;
        std::vector<std::uint8_t> loc;        // per generator, packed coords
        std::vector<std::uint8_t> loc_table;  // per generator mask, XOR-folded
        std::uint64_t member = 0;             // bit v set iff v in the image span
    };
    std::vector<PlaceData> places;
    for (std::size_t i = 0; i < sigma.num_generators(); ++i) {
        PlaceData pd{sigma.place(i), sigma.place(i).local_dim(), {}, {}, 0};
        pd.member = span_membership_mask(kummer_image(family, m, pd.place).basis, 2 * pd.ldim);
        places.push_back(std::move(pd));
    }
    for (long long l : sigma1) {
        PlaceData pd{arith::Place::odd(l), 2, {}, {}, 0};
        std::vector<gf2::BitVec> basis;
        add_to_span(basis, pack_pair(localize_big(family.e1 * m, pd.place),
                                     localize_big(family.e1 * (family.e1 - family.e2), pd.place)));
        add_to_span(basis, pack_pair(localize_big(family.e1 * family.e2, pd.place),
                                     localize_big(cpp_rational(-family.e1 * m), pd.place)));
        pd.member = span_membership_mask(basis, 2 * pd.ldim);
        places.push_back(std::move(pd));
    }
    for (auto &pd : places) {
        for (long long g : gens) pd.loc.push_back(localize_big(g, pd.place).coords);
        pd.loc_table.assign(1ull << G, 0);
        for (std::uint64_t mask = 1; mask < (1ull << G); ++mask) {
            const unsigned low = static_cast<unsigned>(__builtin_ctzll(mask));
            pd.loc_table[mask] =
                static_cast<std::uint8_t>(pd.loc_table[mask & (mask - 1)] ^ pd.loc[low]);
        }
    }

    // Enumerate Q(S,2)^2.
    for (std::uint64_t x1 = 0; x1 < (1ull << G); ++x1) {
        for (std::uint64_t x2 = 0; x2 < (1ull << G); ++x2) {
            bool ok = true;
            for (const auto &pd : places) {
                const std::uint64_t v =
                    pd.loc_table[x1] | (std::uint64_t(pd.loc_table[x2]) << pd.ldim);
                if (!((pd.member >> v) & 1)) {
                    ok = false;
                    break;
                }
            }
            if (ok) data.members.push_back(x1 | (x2 << G));
        }
    }

    // Dimensions.
    const std::uint64_t g_mask = (1ull << G) - 1;
    std::uint64_t sigma1_mask = 0;
    for (std::size_t i = sigma.num_generators(); i < G; ++i) sigma1_mask |= 1ull << i;
    auto count_if = [&](auto &&pred) {
        std::uint64_t c = 0;
        for (std::uint64_t x : data.members)
            if (pred(x & g_mask, (x >> G) & g_mask)) ++c;
        return c;
    };
    SelmerDims &d = data.dims;
    d.sel2 = log2_exact(data.members.size(), "Sel2");
    // Torsion classes.
    const std::uint64_t t1 = class_mask(family.e1 * m, gens) |
                             (class_mask(family.e1 * (family.e1 - family.e2), gens) << G);
    const std::uint64_t t2 =
        class_mask(family.e1 * family.e2, gens) | (class_mask(-family.e1 * m, gens) << G);
    std::vector<std::uint64_t> torsion{0, t1, t2, t1 ^ t2};
    {
        std::set<std::uint64_t> uniq(torsion.begin(), torsion.end());
        d.essential = d.sel2 - log2_exact(uniq.size(), "torsion");
    }
    // The three isogeny directions: the tested component of (x1, x2).
    auto component = [&](std::size_t j, std::uint64_t x1, std::uint64_t x2) -> std::uint64_t {
        return j == 0 ? x2 : (j == 1 ? x1 : (x1 ^ x2));
    };
    for (std::size_t j = 0; j < 3; ++j) {
        const std::uint64_t strict_n =
            count_if([&](std::uint64_t x1, std::uint64_t x2) { return component(j, x1, x2) == 0; });
        const std::uint64_t mod_n = count_if([&](std::uint64_t x1, std::uint64_t x2) {
            return (component(j, x1, x2) & sigma1_mask) == 0;
        });
        d.strict[j] = log2_exact(strict_n, "strict");
        d.modified[j] = log2_exact(mod_n, "modified");
        std::set<std::uint64_t> ts, tm;
        for (std::uint64_t t : torsion) {
            const std::uint64_t comp = component(j, t & g_mask, (t >> G) & g_mask);
            if (comp == 0) ts.insert(t);
            if ((comp & sigma1_mask) == 0) tm.insert(t);
        }
        d.strict_essential[j] = d.strict[j] - log2_exact(ts.size(), "torsion strict");
        d.modified_essential[j] = d.modified[j] - log2_exact(tm.size(), "torsion modified");
    }
    return data;
}

std::string SelmerData::to_json() const {
    std::ostringstream os;
    os << "{\"m\":" << m << ",\"n\":" << n << ",\"dims\":{\"sel2\":" << dims.sel2
       << ",\"essential\":" << dims.essential << ",\"strict\":[" << dims.strict[0] << ','
       << dims.strict[1] << ',' << dims.strict[2] << "],\"modified\":[" << dims.modified[0] << ','
       << dims.modified[1] << ',' << dims.modified[2] << "],\"modified_essential\":["
       << dims.modified_essential[0] << ',' << dims.modified_essential[1] << ','
       << dims.modified_essential[2] << "]}}";
    return os.str();
}

// ---------------------------------------------------------------------------
// Quadratic spaces
// ---------------------------------------------------------------------------

int QuadraticSpace::pair(const gf2::BitVec &x, const gf2::BitVec &y) const {
    gf2::BitVec ey = e.apply(y);
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < ey.words().size(); ++w) acc ^= x.words()[w] & ey.words()[w];
    return __builtin_parityll(acc);
}

int QuadraticSpace::eval(const gf2::BitVec &x) const {
    int out = 0;
    std::vector<std::size_t> on;
    for (std::size_t i = 0; i < dim(); ++i)
        if (x.get(i)) on.push_back(i);
    for (std::size_t i : on) out ^= phi.get(i);
    for (std::size_t a = 0; a < on.size(); ++a)
        for (std::size_t b = a + 1; b < on.size(); ++b) out ^= e.get(on[a], on[b]);
    return out;
}

namespace {

gf2::BitMatrix columns_matrix(const std::vector<gf2::BitVec> &cols, std::size_t dim) {
    gf2::BitMatrix M(dim, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < dim; ++i)
            if (cols[j].get(i)) M.set(i, j, true);
    return M;
}

// Basis of the intersection of two spans.
std::vector<gf2::BitVec> span_intersection(const std::vector<gf2::BitVec> &a,
                                           const std::vector<gf2::BitVec> &b, std::size_t dim) {
    std::vector<gf2::BitVec> all = a;
    all.insert(all.end(), b.begin(), b.end());
    if (a.empty() || b.empty()) return {};
    gf2::BitMatrix M = columns_matrix(all, dim);
    std::vector<gf2::BitVec> out;
    for (const gf2::BitVec &c : gf2::kernel_basis(M)) {
        gf2::BitVec v(dim);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (c.get(i)) v ^= a[i];
        add_to_span(out, v);
    }
    return out;
}

struct LagrangianSearch {
    const QuadraticSpace &space;
    std::vector<gf2::BitVec> u;
    std::size_t half;
    std::vector<gf2::BitVec> k;
    std::size_t budget = 2'000'000;

    bool extend() {
        if (k.size() == half) return true;
        const std::size_t dim = space.dim();
        // Orthogonal complement of the current K.
        gf2::BitMatrix rows(k.size(), dim);
        for (std::size_t i = 0; i < k.size(); ++i) {
            gf2::BitVec r = space.e.apply(k[i]);
            for (std::size_t j = 0; j < dim; ++j)
                if (r.get(j)) rows.set(i, j, true);
        }
        std::vector<gf2::BitVec> perp = gf2::kernel_basis(rows);
        if (perp.size() > 22) throw std::runtime_error("lagrangian: search space too large");
        std::vector<gf2::BitVec> blocked = u;
        blocked.insert(blocked.end(), k.begin(), k.end());
        for (std::uint64_t mask = 1; mask < (1ull << perp.size()); ++mask) {
            if (budget == 0) return false;
            --budget;
            gf2::BitVec v(dim);
            for (std::size_t b = 0; b < perp.size(); ++b)
                if ((mask >> b) & 1) v ^= perp[b];
            if (space.eval(v)) continue;
            if (gf2::in_span(blocked, v)) continue;
            k.push_back(v);
            if (extend()) return true;
            k.pop_back();
        }
        return false;
    }
};

}  // namespace

std::vector<gf2::BitVec> find_lagrangian_complement(const QuadraticSpace &space,
                                                    const std::vector<gf2::BitVec> &u_basis,
                                                    const std::vector<gf2::BitVec> &w_basis) {
    const std::size_t dim = space.dim();
    if (dim % 2) throw std::invalid_argument("lagrangian: odd dimension");
    for (const auto &basis : {u_basis, w_basis}) {
        for (const auto &x : basis) {
            if (space.eval(x)) throw std::invalid_argument("lagrangian: form not zero on input");
            for (const auto &y : basis)
                if (space.pair(x, y)) throw std::invalid_argument("lagrangian: input not isotropic");
        }
    }
    LagrangianSearch search{space, u_basis, dim / 2, {}, 2'000'000};
    // Seed: complement of U cap W inside W.
    std::vector<gf2::BitVec> span = span_intersection(u_basis, w_basis, dim);
    const std::size_t uw_dim = span.size();
    for (const gf2::BitVec &w : w_basis) {
        if (!gf2::in_span(span, w)) {
            span.push_back(w);
            search.k.push_back(w);
        }
    }
    if (!search.extend()) throw std::runtime_error("lagrangian: search exhausted");
    // Postconditions.
    std::vector<gf2::BitVec> all = u_basis;
    all.insert(all.end(), search.k.begin(), search.k.end());
    if (gf2::rank(all) != dim) throw std::runtime_error("lagrangian: V != U + K");
    for (const auto &x : search.k) {
        if (space.eval(x)) throw std::runtime_error("lagrangian: phi nonzero on K");
        for (const auto &y : search.k)
            if (space.pair(x, y)) throw std::runtime_error("lagrangian: K not isotropic");
    }
    if (span_intersection(search.k, w_basis, dim).size() + uw_dim != w_basis.size())
        throw std::runtime_error("lagrangian: W does not split");
    return search.k;
}

// ---------------------------------------------------------------------------
// Twist classes
// ---------------------------------------------------------------------------

namespace {

// Vector of V_Sigma coordinates of one component pair of local square classes.
void write_local(gf2::BitVec &v, std::size_t offset, std::size_t ldim, int component,
                 arith::LocalSquareClass c) {
    for (std::size_t i = 0; i < ldim; ++i)
        if (c.get(i)) v.flip(offset + component * ldim + i);
}

// Representative integers of the standard local square-class basis.
std::vector<long long> local_basis_reps(arith::Place place) {
    if (place.is_infinity()) return {-1};
    if (place.is_two()) return {-1, 2, 5};
    return {arith::least_nonresidue(place.p), place.p};
}

}  // namespace

TwistClass::TwistClass(CurveFamily family, arith::PlaceSet sigma, arith::SquareClass q,
                       std::vector<std::uint8_t> s)
    : family_(family), sigma_(std::move(sigma)), q_(q), s_(std::move(s)) {
    const arith::PlaceSet bad = family_.sigma0();
    for (long long p : bad.odd_primes())
        if (!sigma_.contains_prime(p))
            throw std::invalid_argument("descent: sigma must contain the bad primes");
    if (s_.size() != sigma_.num_generators())
        throw std::invalid_argument("descent: sign vector length mismatch");
    if (q_.bits >> sigma_.num_generators())
        throw std::invalid_argument("descent: q not supported on sigma");

    auto cache = std::make_shared<ClassCache>();
    // Smallest admissible witness.
    for (std::uint64_t bound = 10'000; cache->witness_n == 0; bound *= 10) {
        if (bound > 1'000'000'000ull) throw std::runtime_error("descent: no witness found");
        arith::sieve_squarefree(bound, sigma_, s_,
                                [&](std::uint64_t n, const std::vector<std::uint32_t> &) {
                                    if (cache->witness_n == 0)
                                        cache->witness_n = static_cast<long long>(n);
                                });
    }
    cache->witness_m = arith::representative(q_, sigma_) * cache->witness_n;

    const std::size_t SG = sigma_.num_generators();
    std::size_t dim = 0;
    for (std::size_t i = 0; i < SG; ++i) {
        cache->offsets.push_back(dim);
        dim += 2 * sigma_.place(i).local_dim();
    }
    for (std::size_t i = 0; i < SG; ++i) {
        LocalImage img = kummer_image(family_, cache->witness_m, sigma_.place(i));
        gf2::BitMatrix M(img.basis.size(), 2 * sigma_.place(i).local_dim());
        for (std::size_t r = 0; r < img.basis.size(); ++r)
            for (std::size_t c = 0; c < M.cols(); ++c)
                if (img.basis[r].get(c)) M.set(r, c, true);
        std::vector<gf2::BitVec> ann = gf2::kernel_basis(M);
        gf2::BitMatrix Q(ann.size(), M.cols());
        for (std::size_t r = 0; r < ann.size(); ++r)
            for (std::size_t c = 0; c < M.cols(); ++c)
                if (ann[r].get(c)) Q.set(r, c, true);
        cache->quotient_maps.push_back(std::move(Q));
        cache->local_images.push_back(std::move(img));
    }

    // The symplectic space on V_Sigma.
    QuadraticSpace &sp = cache->sigma_space;
    sp.e = gf2::BitMatrix(dim, dim);
    sp.phi = gf2::BitVec(dim);
    const long long d1 = family_.e1 * family_.e2;            // phi first slot
    const long long d2 = family_.e1 * (family_.e1 - family_.e2);  // phi second slot
    for (std::size_t pi = 0; pi < SG; ++pi) {
        const arith::Place place = sigma_.place(pi);
        const std::size_t ld = place.local_dim(), off = cache->offsets[pi];
        const std::vector<long long> reps = local_basis_reps(place);
        for (std::size_t i = 0; i < ld; ++i)
            for (std::size_t j = 0; j < ld; ++j) {
                const bool h = arith::hilbert_additive(reps[i], reps[j], place);
                if (h) {
                    sp.e.set(off + i, off + ld + j, true);
                    sp.e.set(off + ld + j, off + i, true);
                }
            }
    }
    // phi on the standard basis: full sum over the places of sigma.
    auto phi_global = [&](const gf2::BitVec &x) {
        int out = 0;
        for (std::size_t pi = 0; pi < SG; ++pi) {
            const arith::Place place = sigma_.place(pi);
            const std::size_t ld = place.local_dim(), off = cache->offsets[pi];
            const std::vector<long long> reps = local_basis_reps(place);
            long long r1 = 1, r2 = 1;
            for (std::size_t i = 0; i < ld; ++i) {
                if (x.get(off + i)) r1 *= reps[i];
                if (x.get(off + ld + i)) r2 *= reps[i];
            }
            out ^= arith::hilbert_additive(d1 * r1, 1, d2 * r2, 1, place);
        }
        return out;
    };
    for (std::size_t i = 0; i < dim; ++i) {
        gf2::BitVec e_i(dim);
        e_i.set(i, true);
        if (phi_global(e_i)) sp.phi.set(i, true);
    }

    // U_Sigma: localization of Q(Sigma,2)^2.
    for (int comp = 0; comp < 2; ++comp)
        for (std::size_t g = 0; g < SG; ++g) {
            gf2::BitVec v(dim);
            for (std::size_t pi = 0; pi < SG; ++pi)
                write_local(v, cache->offsets[pi], sigma_.place(pi).local_dim(), comp,
                            arith::localize(sigma_.generator(g), 1, sigma_.place(pi)));
            cache->u_sigma.push_back(v);
        }
    if (gf2::rank(cache->u_sigma) != 2 * SG)
        throw std::runtime_error("descent: global classes not independent locally");
    // W_Sigma: the local images, embedded.
    for (std::size_t pi = 0; pi < SG; ++pi) {
        const std::size_t ld = sigma_.place(pi).local_dim();
        for (const gf2::BitVec &b : cache->local_images[pi].basis) {
            gf2::BitVec v(dim);
            for (std::size_t i = 0; i < 2 * ld; ++i)
                if (b.get(i)) v.set(cache->offsets[pi] + i, true);
            cache->w_sigma.push_back(v);
        }
    }
    cache->uw_sigma = span_intersection(cache->u_sigma, cache->w_sigma, dim);
    cache->k_sigma = find_lagrangian_complement(sp, cache->u_sigma, cache->w_sigma);

    cache_ = cache;
    // Corank parity from the witness.
    KernelMatrices km = build_kernel_matrices(*this, cache->witness_n);
    cache->r = km.dims(*this).essential & 1;
}

redei::FamilyType TwistClass::type() const { return family_.classify().type; }

std::vector<std::size_t> TwistClass::holes() const {
    std::vector<std::size_t> out;
    const redei::FamilyClass fc = family_.classify();
    for (std::size_t j = 0; j < 3; ++j)
        if (fc.is_square[j]) out.push_back(j);
    return out;
}

int TwistClass::r() const { return cache_->r; }

long long TwistClass::m_of(long long n) const { return arith::representative(q_, sigma_) * n; }

int TwistClass::t_x() const { return static_cast<int>(cache_->uw_sigma.size()); }

std::vector<long long> TwistClass::witnesses(std::size_t count, std::size_t min_k,
                                             bool independent_z, std::uint64_t sieve_bound) const {
    const std::size_t SG = sigma_.num_generators();
    if (independent_z) min_k = std::max(min_k, SG + 1);
    std::vector<long long> out;
    for (std::uint64_t bound = 200'000; out.size() < count; bound *= 5) {
        out.clear();
        arith::sieve_squarefree(
            std::min<std::uint64_t>(bound, sieve_bound), sigma_, s_,
            [&](std::uint64_t n, const std::vector<std::uint32_t> &factors) {
                if (out.size() >= count || factors.size() < min_k) return;
                if (independent_z) {
                    arith::OmegaPoint omega =
                        arith::omega_of(n, factors, sigma_);
                    std::vector<gf2::BitVec> trunc;
                    for (std::size_t g = 0; g < SG; ++g) {
                        gf2::BitVec v(factors.size() - 1);
                        for (std::size_t i = 0; i + 1 < factors.size(); ++i)
                            v.set(i, omega.z[g].get(i));
                        trunc.push_back(v);
                    }
                    if (gf2::rank(trunc) != SG) return;
                }
                out.push_back(static_cast<long long>(n));
            });
        if (bound >= sieve_bound) break;
    }
    if (out.size() < count) throw std::runtime_error("descent: witness search exhausted");
    return out;
}

std::string TwistClass::describe() const {
    std::ostringstream os;
    os << "{\"e1\":" << family_.e1 << ",\"e2\":" << family_.e2 << ",\"sigma\":\""
       << sigma_.to_string() << "\",\"q\":" << arith::representative(q_, sigma_) << ",\"s\":[";
    for (std::size_t i = 0; i < s_.size(); ++i) os << (i ? "," : "") << int(s_[i]);
    os << "]}";
    return os.str();
}

// ---------------------------------------------------------------------------
// The explicit kernel matrix
// ---------------------------------------------------------------------------

KernelMatrices build_kernel_matrices(const TwistClass &cls, const arith::OmegaPoint &omega) {
    const arith::PlaceSet &sigma = cls.sigma();
    if (!(omega.sigma == sigma)) throw std::invalid_argument("descent: omega place set mismatch");
    if (omega.k == 0) throw std::invalid_argument("descent: need at least one prime");
    if (omega.sign_vector() != cls.s())
        throw std::invalid_argument("descent: omega sign vector not in the class");
    const std::size_t k = omega.k, SG = sigma.num_generators();
    const long long e1 = cls.family().e1, e2 = cls.family().e2;

    const arith::SquareClass qe1 = arith::square_class_of(e1, sigma) * cls.q();
    const arith::SquareClass qme1 = arith::square_class_of(-e1, sigma) * cls.q();
    const gf2::BitVec z_e1q = omega.z_of(qe1);
    const gf2::BitVec z_me1q = omega.z_of(qme1);
    const gf2::BitVec z_e12 = omega.z_of(arith::square_class_of(e1 * e2, sigma));
    const gf2::BitVec z_e11 = omega.z_of(arith::square_class_of(e1 * (e1 - e2), sigma));

    std::size_t a_rows = 0;
    for (const auto &Q : cls.cache().quotient_maps) a_rows += Q.rows();
    KernelMatrices out;
    out.k = k;
    gf2::BitMatrix B(2 * k + a_rows, 2 * k + 2 * SG);

    // Rows for the primes of n: two local conditions each.
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const bool aij = omega.a.get(i, j);
            if (j == i) {
                B.set(i, i, aij ^ z_e1q.get(i));
                B.set(k + i, k + i, aij ^ z_me1q.get(i));
            } else {
                B.set(i, j, aij);
                B.set(k + i, k + j, aij);
            }
        }
        B.set(i, k + i, z_e12.get(i));
        B.set(k + i, i, z_e11.get(i));
        for (std::size_t g = 0; g < SG; ++g) {
            B.set(i, 2 * k + g, omega.z[g].get(i));
            B.set(k + i, 2 * k + SG + g, omega.z[g].get(i));
        }
    }

    // Rows for the places of sigma: quotient maps composed with localization.
    std::size_t row = 2 * k;
    for (std::size_t pi = 0; pi < SG; ++pi) {
        const arith::Place place = sigma.place(pi);
        const std::size_t ld = place.local_dim();
        // Local coordinates of each column's generator.
        std::vector<std::uint8_t> col_loc(2 * k + 2 * SG, 0);
        for (std::size_t i = 0; i < k; ++i) {
            std::uint8_t c = 0;
            if (place.is_odd()) {
                bool bit = omega.z[pi].get(i);
                if (arith::legendre_additive(-1, place.p)) bit ^= omega.z[0].get(i);
                c = bit ? 1 : 0;
            } else if (place.is_two()) {
                c = static_cast<std::uint8_t>((omega.z[0].get(i) ? 1 : 0) |
                                              (omega.z[1].get(i) ? 4 : 0));
            }
            col_loc[i] = c;
            col_loc[k + i] = c;
        }
        for (std::size_t g = 0; g < SG; ++g) {
            const std::uint8_t c = arith::localize(sigma.generator(g), 1, place).coords;
            col_loc[2 * k + g] = c;
            col_loc[2 * k + SG + g] = c;
        }
        const gf2::BitMatrix &Q = cls.cache().quotient_maps[pi];
        for (std::size_t r = 0; r < Q.rows(); ++r, ++row) {
            for (std::size_t c = 0; c < B.cols(); ++c) {
                const bool comp2 = (c >= k && c < 2 * k) || c >= 2 * k + SG;
                int val = 0;
                for (std::size_t b = 0; b < ld; ++b)
                    if ((col_loc[c] >> b) & 1) val ^= Q.get(r, (comp2 ? ld : 0) + b);
                if (val) B.set(row, c, true);
            }
        }
    }

    // Column selections for the strict and modified variants.
    auto cols_of = [&](const std::vector<std::size_t> &idx) {
        std::vector<std::size_t> rows_all(B.rows());
        for (std::size_t i = 0; i < rows_all.size(); ++i) rows_all[i] = i;
        return B.submatrix(rows_all, idx);
    };
    auto iota_range = [](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> v;
        for (std::size_t i = lo; i < hi; ++i) v.push_back(i);
        return v;
    };
    auto concat = [](std::vector<std::size_t> a, const std::vector<std::size_t> &b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    // Sum of the two components' columns, per generator.
    auto sum_cols = [&](std::size_t lo1, std::size_t lo2, std::size_t len) {
        gf2::BitMatrix M(B.rows(), len);
        for (std::size_t r = 0; r < B.rows(); ++r)
            for (std::size_t c = 0; c < len; ++c)
                if (B.get(r, lo1 + c) ^ B.get(r, lo2 + c)) M.set(r, c, true);
        return M;
    };
    auto hcat = [](const gf2::BitMatrix &L, const gf2::BitMatrix &R) {
        return gf2::assemble({{L, R}});
    };

    const auto s1x1 = iota_range(0, k), s1x2 = iota_range(k, 2 * k);
    const auto sx1 = iota_range(2 * k, 2 * k + SG), sx2 = iota_range(2 * k + SG, 2 * k + 2 * SG);
    out.strict_mat[0] = cols_of(concat(s1x1, sx1));
    out.modified_mat[0] = cols_of(concat(concat(s1x1, sx1), sx2));
    out.strict_mat[1] = cols_of(concat(s1x2, sx2));
    out.modified_mat[1] = cols_of(concat(concat(s1x2, sx1), sx2));
    out.strict_mat[2] = hcat(sum_cols(0, k, k), sum_cols(2 * k, 2 * k + SG, SG));
    out.modified_mat[2] =
        hcat(sum_cols(0, k, k), cols_of(concat(sx1, sx2)));
    out.B = std::move(B);
    return out;
}

KernelMatrices build_kernel_matrices(const TwistClass &cls, long long n) {
    if (n <= 0) throw std::invalid_argument("descent: n must be positive");
    Factored f = factor_squarefree(n);
    std::vector<std::uint32_t> factors;
    for (long long p : f.primes) {
        if (p == 2 || cls.sigma().contains_prime(p))
            throw std::invalid_argument("descent: n must be coprime to sigma");
        factors.push_back(static_cast<std::uint32_t>(p));
    }
    arith::OmegaPoint omega = arith::omega_of(static_cast<std::uint64_t>(n), factors, cls.sigma());
    return build_kernel_matrices(cls, omega);
}

SelmerDims KernelMatrices::dims(const TwistClass &cls) const {
    SelmerDims d;
    d.sel2 = static_cast<int>(gf2::corank(B));
    d.essential = d.sel2 - 2;
    const redei::FamilyClass fc = cls.family().classify();
    for (std::size_t j = 0; j < 3; ++j) {
        d.strict[j] = static_cast<int>(gf2::corank(strict_mat[j]));
        d.modified[j] = static_cast<int>(gf2::corank(modified_mat[j]));
        d.strict_essential[j] = d.strict[j] - (fc.is_square[j] ? 1 : 0);
        d.modified_essential[j] = d.modified[j] - 1;
    }
    return d;
}

// ---------------------------------------------------------------------------
// The alternating Gram matrix
// ---------------------------------------------------------------------------

gf2::BitMatrix build_gram_matrix(const TwistClass &cls, long long n) {
    if (n <= 1) throw std::invalid_argument("descent: need a prime outside sigma");
    Factored f = factor_squarefree(n);
    for (long long p : f.primes)
        if (p == 2 || cls.sigma().contains_prime(p))
            throw std::invalid_argument("descent: n must be coprime to sigma");
    {
        std::vector<std::uint32_t> factors(f.primes.begin(), f.primes.end());
        if (arith::symbol_vector(factors, cls.sigma()) != cls.s())
            throw std::invalid_argument("descent: n not in the class");
    }
    const std::size_t k = f.primes.size(), SG = cls.sigma().num_generators();
    const long long e1 = cls.family().e1, e2 = cls.family().e2;
    const long long m = cls.m_of(n);
    const ClassCache &cache = cls.cache();

    // Places and coordinate offsets of V = V_Sigma + V_{Sigma_1}.
    std::vector<arith::Place> places;
    std::vector<std::size_t> offsets;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < SG; ++i) {
        places.push_back(cls.sigma().place(i));
        offsets.push_back(dim);
        dim += 2 * places.back().local_dim();
    }
    for (long long l : f.primes) {
        places.push_back(arith::Place::odd(l));
        offsets.push_back(dim);
        dim += 4;
    }

    auto loc_vec = [&](long long num, int component) {
        gf2::BitVec v(dim);
        for (std::size_t pi = 0; pi < places.size(); ++pi)
            write_local(v, offsets[pi], places[pi].local_dim(), component,
                        localize_big(num, places[pi]));
        return v;
    };
    // U: image of Q(S,2)^2.
    std::vector<long long> gens;
    for (std::size_t g = 0; g < SG; ++g) gens.push_back(cls.sigma().generator(g));
    for (long long l : f.primes) gens.push_back(l);
    std::vector<gf2::BitVec> u_basis;
    for (int comp = 0; comp < 2; ++comp)
        for (long long g : gens) u_basis.push_back(loc_vec(g, comp));
    // K: cached Lagrangian on V_Sigma plus the unramified parts at l | n.
    std::vector<gf2::BitVec> k_basis;
    for (const gf2::BitVec &ks : cache.k_sigma) {
        gf2::BitVec v(dim);
        for (std::size_t i = 0; i < ks.size(); ++i)
            if (ks.get(i)) v.set(i, true);
        k_basis.push_back(v);
    }
    for (std::size_t li = 0; li < k; ++li) {
        for (int comp = 0; comp < 2; ++comp) {
            gf2::BitVec v(dim);
            v.set(offsets[SG + li] + comp * 2, true);  // the unit basis vector
            k_basis.push_back(v);
        }
    }
    std::vector<gf2::BitVec> uk = u_basis;
    uk.insert(uk.end(), k_basis.begin(), k_basis.end());
    if (uk.size() != dim || gf2::rank(uk) != dim)
        throw std::runtime_error("descent: V is not the direct sum of U and K");

    // Pairing on all of V.
    QuadraticSpace sp;
    sp.e = gf2::BitMatrix(dim, dim);
    for (std::size_t pi = 0; pi < places.size(); ++pi) {
        const arith::Place place = places[pi];
        const std::size_t ld = place.local_dim(), off = offsets[pi];
        const std::vector<long long> reps = local_basis_reps(place);
        for (std::size_t i = 0; i < ld; ++i)
            for (std::size_t j = 0; j < ld; ++j)
                if (arith::hilbert_additive(reps[i], reps[j], place)) {
                    sp.e.set(off + i, off + ld + j, true);
                    sp.e.set(off + ld + j, off + i, true);
                }
    }

    // Basis of W/(W cap K): torsion images at each l, then U_Sigma cap W_Sigma.
    std::vector<gf2::BitVec> basis;
    auto torsion_at = [&](std::size_t li, long long c1, long long c2) {
        const arith::Place place = places[SG + li];
        gf2::BitVec v(dim);
        write_local(v, offsets[SG + li], 2, 0, localize_big(c1, place));
        write_local(v, offsets[SG + li], 2, 1, localize_big(c2, place));
        return v;
    };
    for (std::size_t li = 0; li < k; ++li)
        basis.push_back(torsion_at(li, e1 * m, e1 * (e1 - e2)));
    for (std::size_t li = 0; li < k; ++li)
        basis.push_back(torsion_at(li, e1 * e2, -e1 * m));
    for (const gf2::BitVec &w : cache.uw_sigma) {
        gf2::BitVec v(dim);
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w.get(i)) v.set(i, true);
        basis.push_back(v);
    }

    // Split each basis vector along V = U + K and keep the U part.
    gf2::BitMatrix M = columns_matrix(uk, dim);
    std::vector<gf2::BitVec> u_parts;
    for (const gf2::BitVec &x : basis) {
        gf2::BitVec c(dim);
        if (!gf2::solve(M, x, c)) throw std::runtime_error("descent: split failed");
        gf2::BitVec xu(dim);
        for (std::size_t i = 0; i < u_basis.size(); ++i)
            if (c.get(i)) xu ^= u_basis[i];
        u_parts.push_back(xu);
    }
    gf2::BitMatrix gram(basis.size(), basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < basis.size(); ++j)
            if (sp.pair(u_parts[i], basis[j])) gram.set(i, j, true);
    return gram;
}

gf2::BitMatrix gram_hole_block(const gf2::BitMatrix &gram, std::size_t k, std::size_t t_x,
                               std::size_t hole_index) {
    if (gram.rows() != 2 * k + t_x) throw std::invalid_argument("descent: gram size mismatch");
    gf2::BitMatrix out(k + t_x, k + t_x);
    auto entry = [&](std::size_t i, std::size_t j) -> bool {
        auto pick = [&](std::size_t r, std::size_t c) { return gram.get(r, c); };
        const bool ik = i < k, jk = j < k;
        const std::size_t i3 = 2 * k + (i - k), j3 = 2 * k + (j - k);
        switch (hole_index) {
            case 0:
                return pick(ik ? i : i3, jk ? j : j3);
            case 1:
                return pick(ik ? k + i : i3, jk ? k + j : j3);
            default: {
                bool v = false;
                if (ik && jk)
                    v = pick(i, j) ^ pick(i, k + j) ^ pick(k + i, j) ^ pick(k + i, k + j);
                else if (ik)
                    v = pick(i, j3) ^ pick(k + i, j3);
                else if (jk)
                    v = pick(i3, j) ^ pick(i3, k + j);
                else
                    v = pick(i3, j3);
                return v;
            }
        }
    };
    for (std::size_t i = 0; i < k + t_x; ++i)
        for (std::size_t j = 0; j < k + t_x; ++j)
            if (entry(i, j)) out.set(i, j, true);
    return out;
}

std::vector<int> parameter(const TwistClass &cls, std::size_t witness_count) {
    const std::vector<std::size_t> holes = cls.holes();
    if (holes.empty()) return {};
    const std::size_t t_x = static_cast<std::size_t>(cls.t_x());
    std::vector<long long> ns = cls.witnesses(witness_count, 1, /*independent_z=*/true);
    std::vector<int> out;
    std::vector<std::vector<std::size_t>> ranks(holes.size());
    for (long long n : ns) {
        const std::size_t k = factor_squarefree(n).primes.size();
        gf2::BitMatrix gram = build_gram_matrix(cls, n);
        for (std::size_t h = 0; h < holes.size(); ++h)
            ranks[h].push_back(gf2::rank(gram_hole_block(gram, k, t_x, holes[h])));
    }
    for (std::size_t h = 0; h < holes.size(); ++h) {
        for (std::size_t r : ranks[h])
            if (r != ranks[h][0])
                throw std::runtime_error("descent: hole rank unstable across witnesses");
        out.push_back(static_cast<int>(t_x) - static_cast<int>(ranks[h][0]));
    }
    return out;
}

chains::ChainSpec class_chain_spec(const TwistClass &cls, int truncation) {
    chains::ChainType type = chains::ChainType::A;
    switch (cls.type()) {
        case redei::FamilyType::A: type = chains::ChainType::A; break;
        case redei::FamilyType::B: type = chains::ChainType::B; break;
        case redei::FamilyType::C: type = chains::ChainType::C; break;
    }
    return {type, cls.r(), parameter(cls), truncation};
}

chains::StepSampler class_step_sampler(const TwistClass &cls, std::size_t k) {
    if (k == 0) throw std::invalid_argument("descent: need k >= 1");
    const std::vector<std::size_t> holes = cls.holes();
    auto state_of = [holes](const SelmerDims &dims) {
        chains::State st;
        st.m = dims.essential;
        if (!holes.empty()) st.m1 = dims.modified_essential[holes[0]];
        if (holes.size() > 1) st.m2 = dims.modified_essential[holes[1]];
        return st;
    };
    return [cls, k, state_of](CounterRng &rng) {
        arith::OmegaPoint omega = redei::sample_omega(k, cls.sigma(), cls.s(), rng);
        chains::State from = state_of(build_kernel_matrices(cls, omega).dims(cls));
        arith::OmegaPoint next = redei::extend_omega(omega, cls.s(), rng);
        chains::State to = state_of(build_kernel_matrices(cls, next).dims(cls));
        return std::make_pair(from, to);
    };
}

}  // namespace selmerlab::descent
