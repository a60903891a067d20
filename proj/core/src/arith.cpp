#include "selmerlab/arith.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace selmerlab::arith {

namespace {

using i128 = __int128;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

// p-adic valuation and unit part of a nonzero 128-bit integer.
int strip(i128 &x, long long p) {
    int v = 0;
    while (x % p == 0) {
        x /= p;
        ++v;
    }
    return v;
}

int mod_pos(i128 x, long long m) {
    long long r = static_cast<long long>(x % m);
    return static_cast<int>((r + m) % m);
}

// [[u/p]] for u given as a (possibly huge) integer coprime to p.
int legendre_additive_i128(i128 u, long long p) {
    return legendre_additive(mod_pos(u, p), p);
}

int eps4(i128 u) { return mod_pos(u, 4) == 3; }          // (u-1)/2 mod 2, u odd
int omega8(i128 u) {                                      // (u^2-1)/8 mod 2, u odd
    int r = mod_pos(u, 8);
    return (r == 3 || r == 5);
}

int hilbert_i128(i128 a, i128 b, Place place) {
    if (a == 0 || b == 0) throw std::invalid_argument("hilbert symbol of zero");
    if (place.is_infinity()) return (a < 0 && b < 0) ? 1 : 0;
    if (place.is_two()) {
        int alpha = strip(a, 2), beta = strip(b, 2);
        return (eps4(a) * eps4(b) + alpha * omega8(b) + beta * omega8(a)) & 1;
    }
    long long p = place.p;
    int alpha = strip(a, p), beta = strip(b, p);
    int h = (alpha & 1) * (beta & 1) * (((p % 4) == 3) ? 1 : 0);
    if (beta & 1) h ^= legendre_additive_i128(a, p);
    if (alpha & 1) h ^= legendre_additive_i128(b, p);
    return h & 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Places
// ---------------------------------------------------------------------------

PlaceSet::PlaceSet(std::vector<long long> odd_primes) : odd_primes_(std::move(odd_primes)) {
    std::sort(odd_primes_.begin(), odd_primes_.end());
    for (std::size_t i = 0; i < odd_primes_.size(); ++i) {
        long long p = odd_primes_[i];
        if (p < 3 || p % 2 == 0 || !is_prime(p)) throw std::invalid_argument("bad odd prime in place set");
        if (i && odd_primes_[i - 1] == p) throw std::invalid_argument("duplicate prime in place set");
    }
}

PlaceSet PlaceSet::parse(const std::string &text) {
    std::vector<long long> odd;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        long long v = std::stoll(tok);
        if (v == -1 || v == 2) continue;  // implied generators
        odd.push_back(v);
    }
    return PlaceSet(std::move(odd));
}

long long PlaceSet::generator(std::size_t i) const {
    if (i == 0) return -1;
    if (i == 1) return 2;
    return odd_primes_.at(i - 2);
}

std::size_t PlaceSet::index_of(long long g) const {
    if (g == -1) return 0;
    if (g == 2) return 1;
    auto it = std::lower_bound(odd_primes_.begin(), odd_primes_.end(), g);
    if (it == odd_primes_.end() || *it != g) throw std::invalid_argument("generator not in place set");
    return 2 + static_cast<std::size_t>(it - odd_primes_.begin());
}

bool PlaceSet::contains_prime(long long p) const {
    if (p == 2) return true;
    return std::binary_search(odd_primes_.begin(), odd_primes_.end(), p);
}

Place PlaceSet::place(std::size_t i) const {
    if (i == 0) return Place::infinity();
    if (i == 1) return Place::two();
    return Place::odd(odd_primes_.at(i - 2));
}

PlaceSet PlaceSet::with_prime(long long p) const {
    std::vector<long long> odd = odd_primes_;
    odd.push_back(p);
    return PlaceSet(std::move(odd));
}

std::string PlaceSet::to_string() const {
    std::string s = "-1,2";
    for (long long p : odd_primes_) s += "," + std::to_string(p);
    return s;
}

// ---------------------------------------------------------------------------
// Square classes
// ---------------------------------------------------------------------------

SquareClass square_class_of(long long x, const PlaceSet &sigma) {
    if (x == 0) throw std::invalid_argument("square class of zero");
    SquareClass c;
    i128 v = x;
    if (v < 0) {
        c.set(0, true);
        v = -v;
    }
    int v2 = strip(v, 2);
    c.set(1, v2 & 1);
    for (std::size_t i = 0; i < sigma.odd_primes().size(); ++i) {
        int vp = strip(v, sigma.odd_primes()[i]);
        c.set(2 + i, vp & 1);
    }
    // Any square leftover is fine; a non-sigma prime is not.
    long long rem = static_cast<long long>(v);
    long long root = static_cast<long long>(std::sqrt(static_cast<double>(rem)) + 0.5);
    while (root * root > rem) --root;
    while ((root + 1) * (root + 1) <= rem) ++root;
    if (root * root != rem) throw std::invalid_argument("integer not supported on the place set");
    return c;
}

long long representative(SquareClass c, const PlaceSet &sigma) {
    long long x = 1;
    for (std::size_t i = 0; i < sigma.num_generators(); ++i)
        if (c.get(i)) x *= sigma.generator(i);
    return x;
}

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

std::uint64_t modpow(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
    std::uint64_t result = 1 % mod;
    base %= mod;
    while (exp) {
        if (exp & 1) result = mulmod(result, base, mod);
        base = mulmod(base, base, mod);
        exp >>= 1;
    }
    return result;
}

bool is_prime(long long n) {
    if (n < 2) return false;
    for (long long p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        if (n == p) return true;
        if (n % p == 0) return false;
    }
    std::uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        std::uint64_t x = modpow(a, d, n);
        if (x == 1 || x == std::uint64_t(n) - 1) continue;
        bool witness = true;
        for (int i = 1; i < r; ++i) {
            x = mulmod(x, x, n);
            if (x == std::uint64_t(n) - 1) {
                witness = false;
                break;
            }
        }
        if (witness) return false;
    }
    return true;
}

int legendre_additive(long long a, long long p) {
    if (p < 3 || p % 2 == 0) throw std::invalid_argument("legendre: p must be an odd prime");
    long long r = ((a % p) + p) % p;
    if (r == 0) throw std::invalid_argument("legendre: p divides a");
    return modpow(r, (p - 1) / 2, p) == 1 ? 0 : 1;
}

long long least_nonresidue(long long p) {
    for (long long u = 2;; ++u)
        if (legendre_additive(u, p) == 1) return u;
}

int hilbert_additive(long long a, long long b, Place place) {
    return hilbert_i128(a, b, place);
}

int hilbert_additive(long long an, long long ad, long long bn, long long bd, Place place) {
    // The symbol only depends on square classes, and x and num*den agree.
    return hilbert_i128(static_cast<i128>(an) * ad, static_cast<i128>(bn) * bd, place);
}

LocalSquareClass localize(long long num, long long den, Place place) {
    if (num == 0 || den == 0) throw std::invalid_argument("localize: zero");
    if (place.is_infinity())
        return {place, static_cast<std::uint8_t>(((num < 0) ^ (den < 0)) ? 1 : 0)};
    i128 x = static_cast<i128>(num) * den;  // same square class as num/den
    if (place.is_two()) {
        int v = strip(x, 2);
        int r = mod_pos(x, 8);
        std::uint8_t coords = 0;
        if (r == 3 || r == 7) coords |= 1;        // -1 component
        if (v & 1) coords |= 2;                   // 2 component
        if (r == 3 || r == 5) coords |= 4;        // 5 component
        return {place, coords};
    }
    long long p = place.p;
    int v = strip(x, p);
    std::uint8_t coords = 0;
    if (legendre_additive_i128(x, p)) coords |= 1;  // u_p component
    if (v & 1) coords |= 2;                         // p component
    return {place, coords};
}

LocalSquareClass localize(SquareClass c, const PlaceSet &sigma, Place place) {
    LocalSquareClass out{place, 0};
    for (std::size_t i = 0; i < sigma.num_generators(); ++i)
        if (c.get(i)) out = out * localize(sigma.generator(i), 1, place);
    return out;
}

// ---------------------------------------------------------------------------
// Sieving
// ---------------------------------------------------------------------------

void sieve_squarefree(std::uint64_t N, const PlaceSet &sigma,
                      const std::optional<std::vector<std::uint8_t>> &s,
                      const std::function<void(std::uint64_t, const std::vector<std::uint32_t> &)> &yield,
                      bool with_unit) {
    if (N > (1ull << 31)) throw std::invalid_argument("sieve bound exceeds configured memory cap");
    if (s && s->size() != sigma.num_generators())
        throw std::invalid_argument("sign vector length mismatch");
    if (with_unit) {
        bool ok = true;
        if (s)
            for (std::uint8_t b : *s) ok &= (b == 0);
        if (ok) yield(1, {});
    }
    if (N <= 2) return;
    // Smallest-prime-factor sieve.
    std::vector<std::uint32_t> spf(N, 0);
    for (std::uint32_t i = 2; i < N; ++i) {
        if (spf[i] == 0)
            for (std::uint64_t j = i; j < N; j += i)
                if (spf[j] == 0) spf[j] = i;
    }
    std::vector<std::uint32_t> factors;
    for (std::uint64_t n = 3; n < N; n += 2) {
        factors.clear();
        std::uint32_t m = static_cast<std::uint32_t>(n);
        bool ok = true;
        while (m > 1) {
            std::uint32_t p = spf[m];
            m /= p;
            if (m % p == 0 || sigma.contains_prime(p)) {
                ok = false;  // not square-free, or meets sigma
                break;
            }
            factors.push_back(p);
        }
        if (!ok) continue;
        if (s && symbol_vector(factors, sigma) != *s) continue;
        yield(n, factors);
    }
}

std::vector<std::uint8_t> symbol_vector(const std::vector<std::uint32_t> &factors,
                                        const PlaceSet &sigma) {
    std::vector<std::uint8_t> s(sigma.num_generators(), 0);
    for (std::uint32_t l : factors) {
        s[0] ^= (l % 4 == 3);                     // [[-1/l]]
        s[1] ^= (l % 8 == 3 || l % 8 == 5);       // [[2/l]]
        for (std::size_t i = 0; i < sigma.odd_primes().size(); ++i)
            s[2 + i] ^= legendre_additive(sigma.odd_primes()[i], l);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Omega configurations
// ---------------------------------------------------------------------------

gf2::BitVec OmegaPoint::z_of(SquareClass d) const {
    gf2::BitVec v(k);
    for (std::size_t i = 0; i < sigma.num_generators(); ++i)
        if (d.get(i)) v ^= z[i];
    return v;
}

std::vector<std::uint8_t> OmegaPoint::sign_vector() const {
    std::vector<std::uint8_t> s(sigma.num_generators(), 0);
    for (std::size_t i = 0; i < sigma.num_generators(); ++i) s[i] = z[i].weight() & 1;
    return s;
}

void OmegaPoint::check() const {
    if (a.rows() != k || a.cols() != k || z.size() != sigma.num_generators())
        throw std::logic_error("omega: shape mismatch");
    for (const auto &zv : z)
        if (zv.size() != k) throw std::logic_error("omega: z length mismatch");
    for (std::size_t i = 0; i < k; ++i) {
        int row_sum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            row_sum ^= a.get(i, j);
            if (i != j) {
                bool want = a.get(i, j) ^ (z[0].get(i) & z[0].get(j));
                if (a.get(j, i) != want) throw std::logic_error("omega: reciprocity violated");
            }
        }
        if (row_sum != 0) throw std::logic_error("omega: row sum nonzero");
    }
}

OmegaPoint omega_of(std::uint64_t n, const std::vector<std::uint32_t> &factors,
                    const PlaceSet &sigma) {
    for (std::uint32_t l : factors)
        if (sigma.contains_prime(l)) throw std::invalid_argument("omega_of: n not coprime to sigma");
    OmegaPoint w;
    w.k = factors.size();
    w.sigma = sigma;
    w.a = gf2::BitMatrix(w.k, w.k);
    for (std::size_t i = 0; i < w.k; ++i) {
        int diag = 0;
        for (std::size_t j = 0; j < w.k; ++j) {
            if (i == j) continue;
            int sym = legendre_additive(factors[j], factors[i]);
            w.a.set(i, j, sym);
            diag ^= sym;
        }
        w.a.set(i, i, diag);  // [[ (n/l_i) / l_i ]] = sum of the off-diagonal row
    }
    w.z.assign(sigma.num_generators(), gf2::BitVec(w.k));
    for (std::size_t i = 0; i < w.k; ++i) {
        std::uint32_t l = factors[i];
        w.z[0].set(i, l % 4 == 3);                   // [[-1/l]]
        w.z[1].set(i, l % 8 == 3 || l % 8 == 5);     // [[2/l]]
        for (std::size_t g = 0; g < sigma.odd_primes().size(); ++g)
            w.z[2 + g].set(i, legendre_additive(sigma.odd_primes()[g], l));
    }
    (void)n;
    return w;
}

}  // namespace selmerlab::arith
