#include "selmerlab/redei.hpp"

#include <cmath>
#include <stdexcept>

namespace selmerlab::redei {

using arith::OmegaPoint;
using arith::PlaceSet;
using arith::SquareClass;
using gf2::BitMatrix;
using gf2::BitVec;

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

namespace {

std::size_t dims_total(const std::vector<BlockDim> &dims, std::size_t view_k) {
    std::size_t total = 0;
    for (const BlockDim &d : dims) total += d.size(view_k);
    return total;
}

bool kind_is_high(PrimKind k) { return k == PrimKind::A || k == PrimKind::AT; }
bool kind_is_medium(PrimKind k) { return k == PrimKind::D; }

RedeiExpr filter_expr(const RedeiExpr &expr, bool (*keep)(PrimKind)) {
    RedeiExpr out = expr;
    for (auto &row : out.grid)
        for (auto &block : row) {
            std::vector<Primitive> kept;
            for (auto &p : block.terms)
                if (keep(p.kind)) kept.push_back(p);
            block.terms = std::move(kept);
        }
    return out;
}

std::string class_token(SquareClass c, const PlaceSet &sigma) {
    if (c.is_trivial()) return "1";
    std::string s;
    for (std::size_t i = 0; i < sigma.num_generators(); ++i)
        if (c.get(i)) {
            if (!s.empty()) s += "*";
            s += std::to_string(sigma.generator(i));
        }
    return s;
}

}  // namespace

std::size_t RedeiExpr::total_rows(std::size_t omega_k) const {
    return dims_total(row_dims, view_k(omega_k));
}
std::size_t RedeiExpr::total_cols(std::size_t omega_k) const {
    return dims_total(col_dims, view_k(omega_k));
}

RedeiExpr RedeiExpr::high_part() const {
    return filter_expr(*this, [](PrimKind k) { return kind_is_high(k); });
}
RedeiExpr RedeiExpr::medium_part() const {
    return filter_expr(*this, [](PrimKind k) { return kind_is_medium(k); });
}
RedeiExpr RedeiExpr::low_part() const {
    return filter_expr(*this, [](PrimKind k) { return !kind_is_high(k) && !kind_is_medium(k); });
}

std::string RedeiExpr::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < grid[i].size(); ++j) {
            if (j) out += " | ";
            const Block &b = grid[i][j];
            if (b.terms.empty()) out += "0";
            for (std::size_t t = 0; t < b.terms.size(); ++t) {
                if (t) out += "+";
                const Primitive &p = b.terms[t];
                switch (p.kind) {
                    case PrimKind::A: out += "A"; break;
                    case PrimKind::AT: out += "AT"; break;
                    case PrimKind::D: out += "D[" + class_token(p.d1, sigma) + "]"; break;
                    case PrimKind::ZZ:
                        out += "zz[" + class_token(p.d1, sigma) + "][" + class_token(p.d2, sigma) + "]";
                        break;
                    case PrimKind::ZCol: out += "z[" + class_token(p.d1, sigma) + "]"; break;
                    case PrimKind::ZRow: out += "zT[" + class_token(p.d1, sigma) + "]"; break;
                    case PrimKind::Const: out += "C"; break;
                }
            }
        }
        out += "\n";
    }
    return out;
}

BitMatrix eval(const RedeiExpr &expr, const OmegaPoint &omega) {
    if (!expr.restricted && omega.k < 1) throw std::invalid_argument("eval: k too small for view");
    const std::size_t K = expr.view_k(omega.k);
    BitMatrix M(expr.total_rows(omega.k), expr.total_cols(omega.k));

    // Truncated z vectors are just prefixes; the restricted view uses all k.
    auto zvec = [&](SquareClass d) {
        BitVec full = omega.z_of(d);
        BitVec v(K);
        for (std::size_t i = 0; i < K; ++i) v.set(i, full.get(i));
        return v;
    };

    std::size_t roff = 0;
    for (std::size_t bi = 0; bi < expr.grid.size(); ++bi) {
        const std::size_t bh = expr.row_dims[bi].size(K);
        std::size_t coff = 0;
        for (std::size_t bj = 0; bj < expr.grid[bi].size(); ++bj) {
            const std::size_t bw = expr.col_dims[bj].size(K);
            for (const Primitive &p : expr.grid[bi][bj].terms) {
                switch (p.kind) {
                    case PrimKind::A:
                    case PrimKind::AT: {
                        if (bh != K || bw != K) throw std::invalid_argument("A in non-square block");
                        bool transpose = (p.kind == PrimKind::AT);
                        for (std::size_t i = 0; i < K; ++i)
                            for (std::size_t j = 0; j < K; ++j)
                                if (transpose ? omega.a.get(j, i) : omega.a.get(i, j))
                                    M.flip(roff + i, coff + j);
                        break;
                    }
                    case PrimKind::D: {
                        if (bh != K || bw != K) throw std::invalid_argument("D in non-square block");
                        BitVec z = zvec(p.d1);
                        for (std::size_t i = 0; i < K; ++i)
                            if (z.get(i)) M.flip(roff + i, coff + i);
                        break;
                    }
                    case PrimKind::ZZ: {
                        if (bh != K || bw != K) throw std::invalid_argument("zz in non-square block");
                        BitVec zc = zvec(p.d1), zd = zvec(p.d2);
                        for (std::size_t i = 0; i < K; ++i)
                            if (zc.get(i))
                                for (std::size_t j = 0; j < K; ++j)
                                    if (zd.get(j)) M.flip(roff + i, coff + j);
                        break;
                    }
                    case PrimKind::ZCol: {
                        if (bh != K || bw != 1) throw std::invalid_argument("z column shape");
                        BitVec z = zvec(p.d1);
                        for (std::size_t i = 0; i < K; ++i)
                            if (z.get(i)) M.flip(roff + i, coff);
                        break;
                    }
                    case PrimKind::ZRow: {
                        if (bh != 1 || bw != K) throw std::invalid_argument("z row shape");
                        BitVec z = zvec(p.d1);
                        for (std::size_t j = 0; j < K; ++j)
                            if (z.get(j)) M.flip(roff, coff + j);
                        break;
                    }
                    case PrimKind::Const: {
                        if (p.mat.rows() != bh || p.mat.cols() != bw)
                            throw std::invalid_argument("constant block shape");
                        for (std::size_t i = 0; i < bh; ++i)
                            for (std::size_t j = 0; j < bw; ++j)
                                if (p.mat.get(i, j)) M.flip(roff + i, coff + j);
                        break;
                    }
                }
            }
            coff += bw;
        }
        roff += bh;
    }
    return M;
}

// ---------------------------------------------------------------------------
// Omega sampling
// ---------------------------------------------------------------------------

namespace {

// Rebuilds a full configuration from its free coordinates: the upper triangle
// (incl. diagonal) of the leading (k-1)-block and the truncated z vectors.
OmegaPoint assemble_omega(std::size_t k, const PlaceSet &sigma,
                          const std::vector<std::uint8_t> &s, const BitMatrix &upper,
                          const std::vector<BitVec> &ztrunc) {
    const std::size_t G = sigma.num_generators();
    if (s.size() != G) throw std::invalid_argument("sign vector length");
    OmegaPoint w;
    w.k = k;
    w.sigma = sigma;
    w.a = BitMatrix(k, k);
    w.z.assign(G, BitVec(k));
    for (std::size_t g = 0; g < G; ++g) {
        int sum = 0;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            bool bit = ztrunc[g].get(i);
            w.z[g].set(i, bit);
            sum ^= bit;
        }
        w.z[g].set(k - 1, sum ^ (s[g] & 1));  // sign constraint fixes the last entry
    }
    // Free part and reciprocity inside the leading (k-1)-block.
    for (std::size_t i = 0; i + 1 < k; ++i)
        for (std::size_t j = i; j + 1 < k; ++j) {
            bool v = upper.get(i, j);
            w.a.set(i, j, v);
            if (i != j) w.a.set(j, i, v ^ (w.z[0].get(i) & w.z[0].get(j)));
        }
    // Last column from the row sums, last row from reciprocity, corner from
    // its own row sum.
    for (std::size_t i = 0; i + 1 < k; ++i) {
        int sum = 0;
        for (std::size_t j = 0; j + 1 < k; ++j) sum ^= w.a.get(i, j);
        w.a.set(i, k - 1, sum);
        w.a.set(k - 1, i, sum ^ (w.z[0].get(i) & w.z[0].get(k - 1)));
    }
    int corner = 0;
    for (std::size_t j = 0; j + 1 < k; ++j) corner ^= w.a.get(k - 1, j);
    w.a.set(k - 1, k - 1, corner);
    return w;
}

}  // namespace

OmegaPoint sample_omega(std::size_t k, const PlaceSet &sigma,
                        const std::vector<std::uint8_t> &s, CounterRng &rng) {
    if (k < 1) throw std::invalid_argument("sample_omega: k >= 1 required");
    const std::size_t G = sigma.num_generators();
    BitMatrix upper(k ? k - 1 : 0, k ? k - 1 : 0);
    for (std::size_t i = 0; i + 1 < k; ++i)
        for (std::size_t j = i; j + 1 < k; ++j) upper.set(i, j, rng.next_bit());
    std::vector<BitVec> ztrunc(G, BitVec(k ? k - 1 : 0));
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t i = 0; i + 1 < k; ++i) ztrunc[g].set(i, rng.next_bit());
    return assemble_omega(k, sigma, s, upper, ztrunc);
}

OmegaPoint extend_omega(const OmegaPoint &omega, const std::vector<std::uint8_t> &s,
                        CounterRng &rng) {
    const std::size_t k = omega.k, G = omega.sigma.num_generators();
    BitMatrix upper(k, k);
    for (std::size_t i = 0; i + 1 < k; ++i)
        for (std::size_t j = i; j + 1 < k; ++j) upper.set(i, j, omega.a.get(i, j));
    // New block: the column (a_{i,k})_{i<k}, the diagonal entry a_kk, z_k.
    for (std::size_t i = 0; i < k; ++i) upper.set(i, k - 1, rng.next_bit());
    std::vector<BitVec> ztrunc(G, BitVec(k));
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t i = 0; i + 1 < k; ++i) ztrunc[g].set(i, omega.z[g].get(i));
        ztrunc[g].set(k - 1, rng.next_bit());
    }
    return assemble_omega(k + 1, omega.sigma, s, upper, ztrunc);
}

OmegaPoint project_omega(const OmegaPoint &omega, const std::vector<std::uint8_t> &s) {
    const std::size_t k = omega.k, G = omega.sigma.num_generators();
    if (k < 2) throw std::invalid_argument("project_omega: k >= 2 required");
    BitMatrix upper(k - 2, k - 2);
    for (std::size_t i = 0; i + 2 < k; ++i)
        for (std::size_t j = i; j + 2 < k; ++j) upper.set(i, j, omega.a.get(i, j));
    std::vector<BitVec> ztrunc(G, BitVec(k - 2));
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t i = 0; i + 2 < k; ++i) ztrunc[g].set(i, omega.z[g].get(i));
    return assemble_omega(k - 1, omega.sigma, s, upper, ztrunc);
}

// ---------------------------------------------------------------------------
// Low-rank maximal rank
// ---------------------------------------------------------------------------

std::size_t low_rank_max_rank(const RedeiExpr &expr) {
    for (const auto &row : expr.grid)
        for (const auto &block : row)
            for (const auto &p : block.terms)
                if (p.kind == PrimKind::A || p.kind == PrimKind::AT || p.kind == PrimKind::D)
                    throw std::invalid_argument("low_rank_max_rank: expression has high/medium terms");
    const std::size_t G = expr.sigma.num_generators();
    // Synthetic witness: truncated z vectors equal the standard basis of F2^G;
    // the a-part is irrelevant for low-rank primitives.
    OmegaPoint w;
    w.k = expr.restricted ? G : G + 1;
    w.sigma = expr.sigma;
    w.a = BitMatrix(w.k, w.k);
    w.z.assign(G, BitVec(w.k));
    for (std::size_t g = 0; g < G; ++g) w.z[g].set(g, true);
    return gf2::rank(eval(expr, w));
}

// ---------------------------------------------------------------------------
// Family classification
// ---------------------------------------------------------------------------

namespace {

bool is_perfect_square(long long n) {
    if (n < 0) return false;
    long long r = static_cast<long long>(std::sqrt(static_cast<double>(n)));
    while (r > 0 && r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r * r == n;
}

}  // namespace

FamilyClass classify_family(long long e1, long long e2) {
    if (e1 == 0 || e2 == 0 || e1 == e2)
        throw std::invalid_argument("classify_family: singular parameters");
    FamilyClass fc;
    fc.d = {e1 * (e1 - e2), e1 * e2, -e2 * (e1 - e2)};
    int squares = 0;
    for (int i = 0; i < 3; ++i) {
        fc.is_square[i] = is_perfect_square(fc.d[i]);
        squares += fc.is_square[i];
    }
    switch (squares) {
        case 0: fc.type = FamilyType::A; break;
        case 1: fc.type = FamilyType::B; break;
        case 2: fc.type = FamilyType::C; break;
        default: throw std::logic_error("three squares impossible: d1 d2 d3 < 0");
    }
    return fc;
}

// ---------------------------------------------------------------------------
// Conditional span probability
// ---------------------------------------------------------------------------

Rational conditional_span_probability(const std::vector<SpanInstance> &instances,
                                      std::size_t ambient_dim) {
    const std::size_t D = ambient_dim;
    if (D > 20) throw std::invalid_argument("ambient dimension too large for the dual sum");
    Rational direct = 0, dual = 0;
    boost::multiprecision::cpp_int one = 1;
    for (const SpanInstance &inst : instances) {
        for (const auto &v : inst.v_basis)
            if (v.size() != D) throw std::invalid_argument("basis vector outside ambient space");
        for (const auto &v : inst.w_basis)
            if (v.size() != D) throw std::invalid_argument("basis vector outside ambient space");
        const std::size_t dv = gf2::rank(inst.v_basis);
        const std::size_t dw = gf2::rank(inst.w_basis);
        std::vector<BitVec> joint = inst.v_basis;
        joint.insert(joint.end(), inst.w_basis.begin(), inst.w_basis.end());
        const std::size_t dsum = gf2::rank(joint);
        const std::size_t dcap = dv + dw - dsum;  // dim(V cap W)
        // #(V cap W)/#W
        direct += inst.weight * Rational(one << dcap, one << dw);
    }
    // Dual sum over all functionals h on the ambient space.
    for (std::uint32_t h = 0; h < (1u << D); ++h) {
        auto kills = [&](const std::vector<BitVec> &basis) {
            for (const auto &v : basis) {
                int dot = 0;
                for (std::size_t i = 0; i < D; ++i) dot ^= (((h >> i) & 1u) && v.get(i));
                if (dot) return false;
            }
            return true;
        };
        for (const SpanInstance &inst : instances) {
            if (!kills(inst.v_basis) || !kills(inst.w_basis)) continue;
            const std::size_t dv = gf2::rank(inst.v_basis);
            dual += inst.weight / Rational(one << (D - dv));  // / #(ambient / V)
        }
    }
    if (direct != dual) throw std::logic_error("conditional_span_probability: dual sum mismatch");
    return direct;
}

}  // namespace selmerlab::redei
