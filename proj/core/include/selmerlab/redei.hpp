// Symbolic Redei matrices, uniform in k.
//
// A RedeiExpr is a block grid whose blocks are formal F2-sums of the
// primitives
//     A        the off-diagonal Legendre symbol matrix (a_ij), diagonal
//              completed by zero row sums,
//     A^T      its transpose (A^T = A + z_{-1} z_{-1}^T + D_{-1}),
//     D_d      diag(z^{(d)}),
//     z_c z_d^T, z_d (column), z_d^T (row)   rank-one / vector pieces,
//     constants.
// A block grid row/column is either k-scaled or of fixed width; the view
// flag selects the restricted (size k) or unrestricted (size k-1, last
// prime's row and column dropped) evaluation.
#pragma once

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selmerlab/arith.hpp"
#include "selmerlab/gf2.hpp"
#include "selmerlab/rng.hpp"

namespace selmerlab::redei {

using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class PrimKind : std::uint8_t {
    A,        // k-square
    AT,       // k-square
    D,        // k-square, diag z^{(d1)}
    ZZ,       // k-square, z^{(d1)} (z^{(d2)})^T
    ZCol,     // k x 1, column z^{(d1)}
    ZRow,     // 1 x k, row (z^{(d1)})^T
    Const,    // fixed matrix, any fixed-shape block
};

struct Primitive {
    PrimKind kind;
    arith::SquareClass d1{}, d2{};
    gf2::BitMatrix mat;  // for Const

    static Primitive a() { return {PrimKind::A, {}, {}, {}}; }
    static Primitive at() { return {PrimKind::AT, {}, {}, {}}; }
    static Primitive diag(arith::SquareClass d) { return {PrimKind::D, d, {}, {}}; }
    static Primitive zz(arith::SquareClass c, arith::SquareClass d) { return {PrimKind::ZZ, c, d, {}}; }
    static Primitive zcol(arith::SquareClass d) { return {PrimKind::ZCol, d, {}, {}}; }
    static Primitive zrow(arith::SquareClass d) { return {PrimKind::ZRow, d, {}, {}}; }
    static Primitive constant(gf2::BitMatrix m) { return {PrimKind::Const, {}, {}, std::move(m)}; }
};

struct Block {
    std::vector<Primitive> terms;
};

// Dimension of a block-grid row or column group: k-scaled or fixed.
struct BlockDim {
    bool is_k = true;
    std::size_t fixed = 0;

    static BlockDim K() { return {true, 0}; }
    static BlockDim Fixed(std::size_t n) { return {false, n}; }
    std::size_t size(std::size_t view_k) const { return is_k ? view_k : fixed; }
};

struct RedeiExpr {
    arith::PlaceSet sigma;
    bool restricted = true;  // false: unrestricted (size k-1) view
    std::vector<BlockDim> row_dims, col_dims;
    std::vector<std::vector<Block>> grid;  // grid[i][j]

    // Matrix side length contribution of the k-scaled groups at omega.k = k.
    std::size_t view_k(std::size_t omega_k) const { return restricted ? omega_k : omega_k - 1; }
    std::size_t total_rows(std::size_t omega_k) const;
    std::size_t total_cols(std::size_t omega_k) const;

    // Rank-part split: high (A/A^T), medium (D), low (ZZ/ZCol/ZRow/Const).
    RedeiExpr high_part() const;
    RedeiExpr medium_part() const;
    RedeiExpr low_part() const;

    // One line per block, tokens like `A`, `AT`, `D[-1*2]`, `zz[3][-1]`, `z[2]`.
    std::string to_string() const;
};

// Evaluates the expression at a symbol configuration.
gf2::BitMatrix eval(const RedeiExpr &expr, const arith::OmegaPoint &omega);

// ---------------------------------------------------------------------------
// Omega sampling
// ---------------------------------------------------------------------------

// Uniform point of Omega_k^{Sigma,s} via the free-coordinate bijection
// Omega_k^{Sigma,s} ~ F2^{k(k-1)/2} x (F2^{k-1})^{#Sigma}: the upper triangle
// (a_ij)_{i<=j<=k-1} and the truncated vectors (z_i)_{i<=k-1} are free; the
// last prime's coordinates follow from the sign constraint, reciprocity and
// the row sums.
arith::OmegaPoint sample_omega(std::size_t k, const arith::PlaceSet &sigma,
                               const std::vector<std::uint8_t> &s, CounterRng &rng);

// One chain step Omega_k -> Omega_{k+1}: keeps the free coordinates of omega
// and draws the new block (u1 in F2^{k-1} -- the column (a_ik)_{i<k} -- plus
// a_kk and (z_k^{(p)})_p) uniformly.
arith::OmegaPoint extend_omega(const arith::OmegaPoint &omega,
                               const std::vector<std::uint8_t> &s, CounterRng &rng);

// Section of extend_omega: forgets the last prime's free coordinates.
arith::OmegaPoint project_omega(const arith::OmegaPoint &omega,
                                const std::vector<std::uint8_t> &s);

// ---------------------------------------------------------------------------
// Low-rank maximal rank
// ---------------------------------------------------------------------------

// Maximal rank rho of an expression built from low-rank primitives only:
// evaluated at a synthetic configuration whose truncated symbol vectors
// (z_p') are the standard basis (hence linearly independent).
std::size_t low_rank_max_rank(const RedeiExpr &expr);

// ---------------------------------------------------------------------------
// Family classification
// ---------------------------------------------------------------------------

enum class FamilyType : std::uint8_t { A = 0, B = 1, C = 2 };

struct FamilyClass {
    FamilyType type;
    std::array<long long, 3> d;      // (e1(e1-e2), e1e2, -e2(e1-e2))
    std::array<bool, 3> is_square;   // perfect-square flags
};

FamilyClass classify_family(long long e1, long long e2);

// ---------------------------------------------------------------------------
// Conditional span probability (test oracle)
// ---------------------------------------------------------------------------

struct SpanInstance {
    Rational weight;                    // P(omega)
    std::vector<gf2::BitVec> v_basis;   // V_omega
    std::vector<gf2::BitVec> w_basis;   // W_omega
};

// P(w in V_omega | omega, w uniform in W_omega), computed both by direct
// counting and by the dual functional sum; throws on disagreement.
Rational conditional_span_probability(const std::vector<SpanInstance> &instances,
                                      std::size_t ambient_dim);

}  // namespace selmerlab::redei
