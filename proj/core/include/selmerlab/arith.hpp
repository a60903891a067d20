// Number-theoretic primitives: additive Legendre and Hilbert symbols,
// global and local square classes, square-free sieving, and the
// Legendre-symbol configurations omega(n) that drive every matrix here.
//
// Conventions:
//   * the additive Legendre symbol [[a/p]] is 0 for residues, 1 for
//     non-residues; sums of symbols replace products of +-1 everywhere;
//   * a place set Sigma always contains the formal generator -1 (the sign,
//     localized at infinity) and 2, plus a sorted list of odd primes;
//   * square classes are exponent vectors over the generators of a place
//     set; the group law is XOR.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selmerlab/gf2.hpp"

namespace selmerlab::arith {

// ---------------------------------------------------------------------------
// Places
// ---------------------------------------------------------------------------

// A place of Q relevant to quadratic descent: an odd prime, 2, or infinity.
struct Place {
    // p > 2: the odd prime; p == 2: the dyadic place; p == -1: infinity.
    long long p = -1;

    static Place infinity() { return Place{-1}; }
    static Place two() { return Place{2}; }
    static Place odd(long long prime) { return Place{prime}; }

    bool is_infinity() const { return p == -1; }
    bool is_two() const { return p == 2; }
    bool is_odd() const { return p > 2; }
    // Dimension of Q_p^x modulo squares: 2 at odd p, 3 at 2, 1 at infinity.
    std::size_t local_dim() const { return is_infinity() ? 1 : (is_two() ? 3 : 2); }

    bool operator==(const Place &other) const = default;
};

// Finite set of places Sigma = {-1, 2, odd primes}; the generator list
// [-1, 2, p_1, p_2, ...] fixes coordinate order for square classes and
// symbol vectors throughout the library.
class PlaceSet {
  public:
    PlaceSet() = default;
    explicit PlaceSet(std::vector<long long> odd_primes);

    // Parses e.g. "-1,2,3,5" (the -1 and 2 may be omitted; they are implied).
    static PlaceSet parse(const std::string &text);

    const std::vector<long long> &odd_primes() const { return odd_primes_; }
    // Generators: -1, 2, then the odd primes, ascending.
    std::size_t num_generators() const { return 2 + odd_primes_.size(); }
    long long generator(std::size_t i) const;
    // Index of a generator value (-1, 2, or an odd prime of the set).
    std::size_t index_of(long long g) const;
    bool contains_prime(long long p) const;
    // Places, aligned with generators: infinity, 2, odd primes.
    Place place(std::size_t i) const;

    PlaceSet with_prime(long long p) const;  // Sigma plus one more odd prime

    bool operator==(const PlaceSet &other) const = default;
    std::string to_string() const;

  private:
    std::vector<long long> odd_primes_;
};

// ---------------------------------------------------------------------------
// Square classes
// ---------------------------------------------------------------------------

// An element of Q(Sigma,2): exponent bits over the generators of a PlaceSet.
// Kept as a plain bitmask; all operations take the owning PlaceSet.
struct SquareClass {
    std::uint32_t bits = 0;

    SquareClass operator*(SquareClass other) const { return {bits ^ other.bits}; }
    bool is_trivial() const { return bits == 0; }
    bool get(std::size_t i) const { return (bits >> i) & 1u; }
    void set(std::size_t i, bool v) {
        if (v)
            bits |= (1u << i);
        else
            bits &= ~(1u << i);
    }
    bool operator==(const SquareClass &other) const = default;
};

// The square class of an integer supported on sigma (throws otherwise).
SquareClass square_class_of(long long x, const PlaceSet &sigma);
// Signed representative integer: product of generators with set bits.
long long representative(SquareClass c, const PlaceSet &sigma);

// The square class of x in Q_p^x/(Q_p^x)^2 on the standard basis:
// odd p: {u_p, p} with u_p the least positive non-residue; p=2: {-1, 2, 5};
// infinity: {-1}.
struct LocalSquareClass {
    Place place;
    std::uint8_t coords = 0;  // bit i = coordinate on basis element i

    bool get(std::size_t i) const { return (coords >> i) & 1u; }
    LocalSquareClass operator*(LocalSquareClass other) const {
        if (!(place == other.place)) throw std::invalid_argument("mixed places");
        return {place, static_cast<std::uint8_t>(coords ^ other.coords)};
    }
    bool operator==(const LocalSquareClass &other) const = default;
};

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

// Additive Legendre symbol [[a/p]]: 0 iff a is a square mod p.  p odd prime,
// gcd(a, p) = 1 (throws otherwise).
int legendre_additive(long long a, long long p);

// Additive Hilbert symbol [a,b]_place for nonzero integers; 0 iff
// z^2 = a x^2 + b y^2 has a nontrivial local solution.
int hilbert_additive(long long a, long long b, Place place);
// Rational inputs a = an/ad, b = bn/bd (square classes only depend on
// numerator times denominator).
int hilbert_additive(long long an, long long ad, long long bn, long long bd, Place place);

// Least positive quadratic non-residue mod an odd prime (the basis unit u_p).
long long least_nonresidue(long long p);

// Localization of a nonzero rational (or square class) at a place.
LocalSquareClass localize(long long num, long long den, Place place);
LocalSquareClass localize(SquareClass c, const PlaceSet &sigma, Place place);

// Deterministic primality for 64-bit inputs (Miller-Rabin, fixed bases).
bool is_prime(long long n);
// Fast modular exponentiation (used by the symbol routines; exposed for tests).
std::uint64_t modpow(std::uint64_t base, std::uint64_t exp, std::uint64_t mod);

// ---------------------------------------------------------------------------
// Sieving
// ---------------------------------------------------------------------------

// Yields every square-free n < N coprime to sigma, ascending, with its sorted
// prime factorization; when s is given, only n with [[p/n]] = s_p for every
// generator p of sigma.  s is indexed like the generators (s[0] for -1,
// s[1] for 2, then the odd primes).  n = 1 is emitted only when with_unit.
void sieve_squarefree(std::uint64_t N, const PlaceSet &sigma,
                      const std::optional<std::vector<std::uint8_t>> &s,
                      const std::function<void(std::uint64_t n, const std::vector<std::uint32_t> &factors)> &yield,
                      bool with_unit = false);

// Symbol vector ([[p/n]])_p over the generators of sigma, from a factorization.
std::vector<std::uint8_t> symbol_vector(const std::vector<std::uint32_t> &factors,
                                        const PlaceSet &sigma);

// ---------------------------------------------------------------------------
// Omega configurations
// ---------------------------------------------------------------------------

// A Legendre-symbol configuration ((a_ij), (z^{(p)})) in Omega_k^{Sigma,*}:
//   a_ij = [[l_j / l_i]] for i != j, a_ii = [[ (n/l_i) / l_i ]],
//   z_i^{(p)} = [[p / l_i]],
// with primes ascending.  Invariants: a_ji = a_ij + z_i^{(-1)} z_j^{(-1)},
// and every row of a sums to zero.
struct OmegaPoint {
    std::size_t k = 0;
    PlaceSet sigma;
    gf2::BitMatrix a;              // k x k
    std::vector<gf2::BitVec> z;    // one vector of length k per generator

    // z^{(d)} for a square class d over sigma: XOR of the generator columns.
    gf2::BitVec z_of(SquareClass d) const;
    // Sign vector s_p = sum_i z_i^{(p)}.
    std::vector<std::uint8_t> sign_vector() const;
    // Throws if reciprocity or the row sums fail.
    void check() const;
};

// The configuration of a square-free n (ascending prime factors) coprime
// to sigma.
OmegaPoint omega_of(std::uint64_t n, const std::vector<std::uint32_t> &factors,
                    const PlaceSet &sigma);

}  // namespace selmerlab::arith
