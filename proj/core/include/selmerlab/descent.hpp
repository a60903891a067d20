// Explicit 2-descent machinery for quadratic twists y^2 = x(x - e1 m)(x - e2 m)
// with full rational 2-torsion:
//   * local Kummer images at the places of Sigma (exact rational point sweep),
//   * an independent Selmer-group oracle by enumeration of Q(S,2)^2,
//   * the explicit kernel matrix whose kernel is Sel_2 (with strict and
//     modified-strict column variants for the three 2-isogeny directions),
//   * the alternating Gram matrix of the local-duality pairing on a
//     systematic Lagrangian complement,
//   * the class parameter t = (t_1, ..., t_s) read off low-rank diagonal
//     sub-blocks at witnesses with independent symbol vectors.
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "selmerlab/arith.hpp"
#include "selmerlab/chains.hpp"
#include "selmerlab/gf2.hpp"
#include "selmerlab/redei.hpp"

namespace selmerlab::descent {

// ---------------------------------------------------------------------------
// Curve family
// ---------------------------------------------------------------------------

// The twist family y^2 = x(x - e1 m)(x - e2 m), m square-free.
struct CurveFamily {
    long long e1 = 0, e2 = 0;

    CurveFamily(long long e1_, long long e2_);  // throws unless e1 e2 (e1-e2) != 0

    // Matrix of the torsion images: columns are the square-class pairs of
    // kappa(P1) and kappa(P2) up to the twist factor m:
    //   kappa(P1) = (e1 m, e1(e1-e2)),  kappa(P2) = (e1 e2, -e1 m).
    std::array<std::array<long long, 2>, 2> kummer_matrix() const {
        return {{{e1, e1 * e2}, {e1 * (e1 - e2), -e1}}};
    }
    // Minimal place set: -1, 2 and the odd primes dividing 2 e1 e2 (e1-e2).
    arith::PlaceSet sigma0() const;
    redei::FamilyClass classify() const { return redei::classify_family(e1, e2); }
};

// ---------------------------------------------------------------------------
// Local Kummer images
// ---------------------------------------------------------------------------

// Basis of the image of the local Kummer map inside the square of the local
// square-class group.  A vector packs the two components: bits [0, dim) hold
// the first component, bits [dim, 2 dim) the second, where dim is the local
// square-class dimension of the place.
struct LocalImage {
    arith::Place place;
    std::size_t expected_dim = 0;
    std::vector<gf2::BitVec> basis;  // linearly independent

    std::size_t dim() const { return basis.size(); }
    bool contains(const gf2::BitVec &v) const { return gf2::in_span(basis, v); }
};

// Image of the local Kummer map of the twist by m at a place, computed by an
// exact rational sweep over x-candidates u * p^v plus the torsion images; the
// sweep bound escalates once before failing.  Expected dimensions: 2 at odd
// p, 3 at p = 2, 1 at infinity.
LocalImage kummer_image(const CurveFamily &family, long long m, arith::Place place);

// ---------------------------------------------------------------------------
// Selmer dimensions
// ---------------------------------------------------------------------------

// Dimensions attached to one twist.  Index j in {0,1,2} runs over the three
// 2-isogeny directions, aligned with the d-triple of classify_family:
//   j=0: condition on x^(2)   (distinguished value e1(e1-e2)),
//   j=1: condition on x^(1)   (distinguished value e1 e2),
//   j=2: condition on x^(1) + x^(2)  (distinguished value -e2(e1-e2)).
struct SelmerDims {
    int sel2 = 0;       // dim Sel_2
    int essential = 0;  // dim Sel_2 minus the torsion contribution
    std::array<int, 3> strict{};              // x-part vanishes globally on S
    std::array<int, 3> strict_essential{};    // strict, modulo torsion
    std::array<int, 3> modified{};            // x-part vanishes at the primes of n
    std::array<int, 3> modified_essential{};  // modified, modulo torsion
};

struct SelmerData {
    long long m = 0;  // the twist
    long long n = 0;  // prime-to-Sigma part of m
    SelmerDims dims;
    // All Selmer elements as packed masks over the generators of Q(S,2)^2
    // (first-component bits low, second-component bits high); generator
    // order: -1, 2, odd primes of Sigma, then the primes of n ascending.
    std::vector<std::uint64_t> members;
    std::vector<long long> s_generators;  // the generator list used

    std::string to_json() const;
};

// Enumerates Q(S,2)^2 and keeps the everywhere-locally-consistent classes.
// S = Sigma plus the primes of m outside Sigma; throws if S has more than
// `cap` generators (cost 4^{#gens}).
SelmerData selmer_oracle(const CurveFamily &family, long long m, const arith::PlaceSet &sigma,
                         std::size_t cap = 10);

// ---------------------------------------------------------------------------
// Quadratic spaces and Lagrangian complements
// ---------------------------------------------------------------------------

// A symplectic F2-space with a quadratic refinement: e is the (symmetric,
// zero-diagonal, nondegenerate) Gram matrix of the pairing on the standard
// basis and phi holds the values of the form on the basis; general values
// follow from phi(x+y) = phi(x) + phi(y) + e(x,y).
struct QuadraticSpace {
    gf2::BitMatrix e;
    gf2::BitVec phi;

    std::size_t dim() const { return e.rows(); }
    int pair(const gf2::BitVec &x, const gf2::BitVec &y) const;
    int eval(const gf2::BitVec &x) const;
};

// A Lagrangian K with V = U + K (direct), phi(K) = 0 and
// W = (U cap W) + (K cap W), for Lagrangian U, W with phi(U) = phi(W) = 0.
// Deterministic: seeds K with a complement of U cap W inside W, then extends
// by depth-first search over the phi-zero vectors of the current orthogonal
// complement that stay transverse to U.  Throws if the search exhausts
// (impossible when the preconditions hold).
std::vector<gf2::BitVec> find_lagrangian_complement(const QuadraticSpace &space,
                                                    const std::vector<gf2::BitVec> &u_basis,
                                                    const std::vector<gf2::BitVec> &w_basis);

// ---------------------------------------------------------------------------
// Twist classes
// ---------------------------------------------------------------------------

// Per-class state, built once in the TwistClass constructor and shared
// read-only afterwards.
struct ClassCache {
    long long witness_n = 0;  // smallest admissible n with at least one prime
    long long witness_m = 0;
    // Aligned with sigma.place(i).
    std::vector<LocalImage> local_images;
    // Rows annihilate the corresponding local image (quotient maps).
    std::vector<gf2::BitMatrix> quotient_maps;
    // The symplectic space on the places of sigma with its refinement.
    QuadraticSpace sigma_space;
    std::vector<std::size_t> offsets;  // coordinate offset per sigma place
    std::vector<gf2::BitVec> u_sigma, w_sigma, uw_sigma, k_sigma;
    int r = 0;  // corank parity of the essential dimension
};

// A local-equivalence class of twists: all m = q n with n square-free,
// coprime to sigma, positive, and with prescribed symbol vector s.
class TwistClass {
  public:
    TwistClass(CurveFamily family, arith::PlaceSet sigma, arith::SquareClass q,
               std::vector<std::uint8_t> s);

    const CurveFamily &family() const { return family_; }
    const arith::PlaceSet &sigma() const { return sigma_; }
    arith::SquareClass q() const { return q_; }
    const std::vector<std::uint8_t> &s() const { return s_; }

    redei::FamilyType type() const;
    // Indices j (in the SelmerDims convention) of the square distinguished
    // values; size 0, 1 or 2 for types A, B, C.
    std::vector<std::size_t> holes() const;
    // Corank parity of the essential Selmer dimension, from the first witness.
    int r() const;

    long long m_of(long long n) const;  // representative(q) * n
    // Witnesses: the `count` smallest admissible n with at least min_k prime
    // factors (optionally requiring independent truncated symbol vectors).
    std::vector<long long> witnesses(std::size_t count, std::size_t min_k,
                                     bool independent_z = false,
                                     std::uint64_t sieve_bound = 20'000'000ULL) const;

    // dim of U_Sigma cap W_Sigma: the fixed block size of the Gram matrix.
    int t_x() const;

    const ClassCache &cache() const { return *cache_; }

    std::string describe() const;

  private:
    CurveFamily family_;
    arith::PlaceSet sigma_;
    arith::SquareClass q_;
    std::vector<std::uint8_t> s_;
    std::shared_ptr<const ClassCache> cache_;
};

// ---------------------------------------------------------------------------
// The explicit kernel matrix
// ---------------------------------------------------------------------------

// Matrices over F2 whose kernels are the 2-Selmer group and its strict /
// modified-strict subgroups, as subgroups of Q(S,2)^2.  Column layout of B:
// [ord at primes of n for x^(1) | same for x^(2) | Sigma exponents of x^(1)
// | Sigma exponents of x^(2)].
struct KernelMatrices {
    gf2::BitMatrix B;                           // (2k + a) x (2k + 2#Sigma)
    std::array<gf2::BitMatrix, 3> strict_mat;   // columns of one isogeny direction
    std::array<gf2::BitMatrix, 3> modified_mat; // strict only at the primes of n
    std::size_t k = 0;

    SelmerDims dims(const TwistClass &cls) const;  // coranks and essential shifts
};

// Assembles the kernel matrices from a symbol configuration omega (the
// matrix is a uniform expression in omega, so synthetic configurations are
// accepted); the rows for the places of Sigma compose the localization of
// Q(S,2)^2 with fixed quotient maps modulo the local Kummer images.
KernelMatrices build_kernel_matrices(const TwistClass &cls, const arith::OmegaPoint &omega);
// Convenience: omega(n) of an actual twist; n must lie in the class.
KernelMatrices build_kernel_matrices(const TwistClass &cls, long long n);

// ---------------------------------------------------------------------------
// The alternating Gram matrix
// ---------------------------------------------------------------------------

// Gram matrix of theta(x, y) = e(x_U, y) on the basis
//   kappa_l(P1) (l | n), kappa_l(P2) (l | n), basis of U_Sigma cap W_Sigma,
// where x = x_U + x_K splits along the cached complement; alternating of
// size 2k + t_x, corank equal to dim Sel_2, lower-right block zero.
gf2::BitMatrix build_gram_matrix(const TwistClass &cls, long long n);

// Square sub-block of the Gram matrix used by the parameter: the hole-j
// diagonal block bordered by the fixed rows and columns.
gf2::BitMatrix gram_hole_block(const gf2::BitMatrix &gram, std::size_t k, std::size_t t_x,
                               std::size_t hole_index);

// The class parameter (t_1, ..., t_s): t_j = t_x - rank of the hole block at
// witnesses whose truncated symbol vectors are independent; the rank is
// checked for stability across `witness_count` witnesses.
std::vector<int> parameter(const TwistClass &cls, std::size_t witness_count = 5);

// Chain specification matching the class: its type, corank parity and
// parameter.
chains::ChainSpec class_chain_spec(const TwistClass &cls, int truncation = 40);

// Step sampler for chain validation: draws a uniform symbol configuration
// with k primes, extends it by one prime, and reports the two refined
// dimension states (essential dim, per-hole modified essential dims).
// Re-entrant; safe to call from several threads with separate generators.
chains::StepSampler class_step_sampler(const TwistClass &cls, std::size_t k);

}  // namespace selmerlab::descent
