// Generating functions and moments of the limit corank distributions, and
// the unlinked-subset formula for the omega-average order of the kernel of a
// high-rank restricted Redei matrix (Heath-Brown's character sum method),
// evaluated exactly.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <vector>

#include "selmerlab/arith.hpp"
#include "selmerlab/chains.hpp"
#include "selmerlab/redei.hpp"

namespace selmerlab::moments {

using Rational = boost::multiprecision::cpp_rational;

struct GenFnSpec {
    chains::ChainType type = chains::ChainType::A;
    int t = 0;                 // corank parity
    std::vector<int> tt;       // hole parameters; chains::kMinusInfinity allowed

    void validate() const;
};

// F(X) = F0(X) + (-1)^t F0(-X), the generating function of the limit corank
// distribution; products and series truncated to double precision.
double gen_fn_eval(const GenFnSpec &spec, double X);

// The xi-th moment sum_m P(m) 2^(xi m), by the closed finite sums, exact.
Rational moment(const GenFnSpec &spec, unsigned xi);

// ---------------------------------------------------------------------------
// Omega-average order of ker of a high-rank restricted Redei matrix
// ---------------------------------------------------------------------------

// Shape and arithmetic frame of a restricted Redei matrix of block size
// (ak+b) x (ck+d): the number of k-scaled row and column groups, the fixed
// tail sizes, the place set and the sign vector s.
struct UnlinkedFrame {
    std::size_t a = 0, c = 0;   // k-scaled row / column groups (a >= c)
    std::size_t b = 0, d = 0;   // fixed rows / columns
    arith::PlaceSet sigma;
    std::vector<std::uint8_t> s;

    // Frame read off an expression's dimension lists; validates the layout.
    static UnlinkedFrame of(const redei::RedeiExpr &expr, const std::vector<std::uint8_t> &s);
};

// Rewrites A^T as A + z_{-1} z_{-1}^T + D_{-1} everywhere and checks the
// normal form: the high part is exactly diag(A,...,A) on the leading c
// diagonal blocks, constants only in fixed-by-fixed blocks.  Throws if the
// expression cannot be normalized this way.
redei::RedeiExpr normalize_high_rank(const redei::RedeiExpr &expr);

// Corank-preserving augmentation: borders the matrix with the z-column
// blocks diag(Z_Sigma,...,Z_Sigma) and an identity, adding a * #Sigma fixed
// rows and columns and raising the rank by exactly a * #Sigma.
redei::RedeiExpr augment(const redei::RedeiExpr &expr);

// The omega-average order lim_k E(2^corank B(omega)), omega in
// Omega_k^{Sigma,s}, via the exact unlinked-subset formula
//   E = 2^{(1-2^a) #Sigma - b} sum_{Lambda unlinked, #Lambda = 2^a}
//         sum_{z in Omega_Lambda^{Sigma,s}, v~, w~} (-1)^{psi(z,v~,w~)},
// each inner sum evaluated as an exact quadratic character sum.
// When `normalized` is false the expression is normalized first (and the
// call rejects expressions that do not normalize).
Rational hb_average(const UnlinkedFrame &frame, const redei::RedeiExpr &expr,
                    bool normalized = false);

// Exact character sum sum_{x in F2^n} (-1)^{x^T M x + L x + c} for a
// quadratic form given by strictly-upper rows of M as bit masks; exposed for
// tests.  n <= 64.
boost::multiprecision::cpp_int character_sum(std::vector<std::uint64_t> upper_rows,
                                             std::uint64_t linear, bool constant);

}  // namespace selmerlab::moments
