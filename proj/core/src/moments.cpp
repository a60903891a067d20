#include "selmerlab/moments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace selmerlab::moments {

namespace {

using boost::multiprecision::cpp_int;

Rational pow2q(long long e) {
    cpp_int p = cpp_int(1) << static_cast<unsigned>(e < 0 ? -e : e);
    return e >= 0 ? Rational(p) : Rational(1, p);
}

bool minus_inf(int t) { return t == chains::kMinusInfinity; }

}  // namespace

void GenFnSpec::validate() const {
    std::size_t want = type == chains::ChainType::A ? 0 : (type == chains::ChainType::B ? 1 : 2);
    if (tt.size() != want) throw std::invalid_argument("gen_fn: wrong number of hole parameters");
}

double gen_fn_eval(const GenFnSpec &spec, double X) {
    spec.validate();
    auto base = [](double x) {
        double num = 1.0, den = 1.0;
        for (int j = 0; j <= 64; ++j) {
            num *= 1.0 + std::ldexp(x, -j);
            den *= 1.0 + std::ldexp(1.0, -j);
        }
        return num / den;
    };
    auto series = [&spec](double x) {
        if (spec.type == chains::ChainType::A) return 1.0;
        if (spec.type == chains::ChainType::B) {
            if (minus_inf(spec.tt[0])) return 1.0;
            double sum = 1.0, term = 1.0;
            for (int i = 1; i <= 300; ++i) {
                term *= std::ldexp(1.0, spec.tt[0]) * (std::ldexp(x, 1 - i) - 1.0) /
                        (std::ldexp(1.0, 2 * i) - 1.0);
                sum += term;
                if (std::abs(term) < 1e-17 * (1.0 + std::abs(sum)) && i > 2) break;
            }
            return sum;
        }
        const int cap1 = minus_inf(spec.tt[0]) ? 0 : 60;
        const int cap2 = minus_inf(spec.tt[1]) ? 0 : 60;
        double sum = 0.0;
        for (int i1 = 0; i1 <= cap1; ++i1) {
            for (int i2 = 0; i2 <= cap2; ++i2) {
                // Accumulate in log2 scale: the 2^{2 i1 i2} factor and the
                // (2^{2j} - 1) denominators both overflow doubles separately.
                double lg = (i1 ? i1 * static_cast<double>(spec.tt[0]) : 0.0) +
                            (i2 ? i2 * static_cast<double>(spec.tt[1]) : 0.0) + 2.0 * i1 * i2;
                double sign = 1.0;
                for (int j = 1; j <= i1 + i2; ++j) {
                    const double f = std::ldexp(x, 1 - j) - 1.0;
                    if (f == 0.0) { sign = 0.0; break; }
                    if (f < 0) sign = -sign;
                    lg += std::log2(std::abs(f));
                }
                for (int j = 1; j <= i1; ++j) lg -= std::log2(std::ldexp(1.0, 2 * j) - 1.0);
                for (int j = 1; j <= i2; ++j) lg -= std::log2(std::ldexp(1.0, 2 * j) - 1.0);
                if (sign != 0.0) sum += sign * std::exp2(lg);
            }
        }
        return sum;
    };
    double f0_pos = base(X) * series(X);
    double f0_neg = base(-X) * series(-X);
    return f0_pos + (spec.t % 2 == 0 ? f0_neg : -f0_neg);
}

Rational moment(const GenFnSpec &spec, unsigned xi) {
    spec.validate();
    auto p2m1 = [](unsigned e) { return cpp_int((cpp_int(1) << e) - 1); };
    if (spec.type == chains::ChainType::A) {
        Rational r = 1;
        for (unsigned j = 1; j <= xi; ++j) r *= Rational((cpp_int(1) << j) + 1);
        return r;
    }
    if (spec.type == chains::ChainType::B) {
        const unsigned imax = minus_inf(spec.tt[0]) ? 0 : xi;
        Rational sum = 0;
        for (unsigned i = 0; i <= imax; ++i) {
            Rational term = i == 0 ? Rational(1) : pow2q(static_cast<long long>(i) * spec.tt[0]);
            for (unsigned j = 1; j <= xi - i; ++j) term *= Rational(p2m1(2 * (i + j)), p2m1(j));
            sum += term;
        }
        return sum;
    }
    const unsigned cap1 = minus_inf(spec.tt[0]) ? 0 : xi;
    Rational sum = 0;
    cpp_int top = 1;
    for (unsigned j = 1; j <= xi; ++j) top *= p2m1(2 * j);
    for (unsigned i1 = 0; i1 <= cap1; ++i1) {
        const unsigned cap2 = minus_inf(spec.tt[1]) ? 0 : xi - i1;
        for (unsigned i2 = 0; i2 <= cap2; ++i2) {
            long long e = (i1 ? static_cast<long long>(i1) * spec.tt[0] : 0) +
                          (i2 ? static_cast<long long>(i2) * spec.tt[1] : 0) +
                          2LL * i1 * i2;
            Rational term = pow2q(e) * Rational(top);
            for (unsigned j = 1; j <= i1; ++j) term /= Rational(p2m1(2 * j));
            for (unsigned j = 1; j <= i2; ++j) term /= Rational(p2m1(2 * j));
            for (unsigned j = 1; j <= xi - i1 - i2; ++j) term /= Rational(p2m1(j));
            sum += term;
        }
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Character sums
// ---------------------------------------------------------------------------

cpp_int character_sum(std::vector<std::uint64_t> upper_rows, std::uint64_t linear, bool constant) {
    const std::size_t n0 = upper_rows.size();
    if (n0 > 64) throw std::invalid_argument("character_sum: more than 64 variables");
    // Symmetrize to full adjacency masks (partner sets) for convenience.
    std::vector<std::uint64_t> adj(n0, 0);
    for (std::size_t i = 0; i < n0; ++i) {
        std::uint64_t row = upper_rows[i] & ~((i + 1 < 64 ? (1ULL << (i + 1)) : 0ULL) - 1ULL);
        if (i + 1 >= 64) row = 0;  // no j > i fits
        adj[i] |= row;
        for (std::size_t j = i + 1; j < n0; ++j)
            if ((upper_rows[i] >> j) & 1ULL) adj[j] |= 1ULL << i;
    }
    std::uint64_t alive = n0 == 64 ? ~0ULL : ((1ULL << n0) - 1ULL);
    cpp_int scale = 1;
    while (true) {
        // Drop variables with no quadratic partner.
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < n0; ++i) {
                if (!((alive >> i) & 1ULL)) continue;
                if (adj[i] & alive) continue;
                if ((linear >> i) & 1ULL) return 0;  // x_i purely linear: sum vanishes
                scale <<= 1;                          // x_i absent: factor 2
                alive &= ~(1ULL << i);
                changed = true;
            }
        }
        // Find a hyperbolic pair (i, j).
        std::size_t i = n0;
        for (std::size_t k = 0; k < n0; ++k)
            if (((alive >> k) & 1ULL) && (adj[k] & alive)) { i = k; break; }
        if (i == n0) break;  // purely affine remainder, all vars already dropped
        const std::size_t j = static_cast<std::size_t>(std::countr_zero(adj[i] & alive));
        // q = x_i * f + g with f = sum_{k in adj[i]} x_k + L_i; summing over x_i
        // gives 2 * [f = 0], i.e. substitute x_j = sum_{k in adj[i], k != j} x_k + L_i
        // into g and drop both variables.
        const std::uint64_t sub = (adj[i] & alive) & ~(1ULL << j);  // x_j := sub + c_sub
        const bool c_sub = (linear >> i) & 1ULL;
        alive &= ~(1ULL << i);
        alive &= ~(1ULL << j);
        scale <<= 1;
        // Remove x_i from the form entirely (its row and linear bit are consumed).
        for (std::size_t k = 0; k < n0; ++k) adj[k] &= ~(1ULL << i);
        adj[i] = 0;
        linear &= ~(1ULL << i);
        // Substitute into quadratic terms x_j x_k (k alive, partner of j).
        std::uint64_t partners = adj[j] & alive;
        for (std::size_t k = 0; k < n0; ++k) adj[k] &= ~(1ULL << j);
        adj[j] = 0;
        while (partners) {
            const std::size_t k = static_cast<std::size_t>(std::countr_zero(partners));
            partners &= partners - 1;
            // x_j x_k -> (sum + c_sub) x_k
            std::uint64_t m = sub;
            while (m) {
                const std::size_t l = static_cast<std::size_t>(std::countr_zero(m));
                m &= m - 1;
                if (l == k) {
                    linear ^= 1ULL << k;  // x_k^2 = x_k
                } else {
                    adj[l] ^= 1ULL << k;
                    adj[k] ^= 1ULL << l;
                }
            }
            if (c_sub) linear ^= 1ULL << k;
        }
        // Substitute into the linear term L_j x_j.
        if ((linear >> j) & 1ULL) {
            linear &= ~(1ULL << j);
            linear ^= sub;
            if (c_sub) constant = !constant;
        }
    }
    if (linear & alive) return 0;
    cpp_int result = scale << std::popcount(alive);
    return constant ? -result : result;
}

// ---------------------------------------------------------------------------
// Expression normal form
// ---------------------------------------------------------------------------

namespace {

bool same_primitive(const redei::Primitive &x, const redei::Primitive &y) {
    if (x.kind != y.kind || !(x.d1 == y.d1) || !(x.d2 == y.d2)) return false;
    if (x.kind != redei::PrimKind::Const) return true;
    if (x.mat.rows() != y.mat.rows() || x.mat.cols() != y.mat.cols()) return false;
    for (std::size_t r = 0; r < x.mat.rows(); ++r)
        for (std::size_t c = 0; c < x.mat.cols(); ++c)
            if (x.mat.get(r, c) != y.mat.get(r, c)) return false;
    return true;
}

// XOR-cancel duplicate primitives within a block.
redei::Block reduce_block(const redei::Block &blk) {
    redei::Block out;
    for (const auto &term : blk.terms) {
        auto it = std::find_if(out.terms.begin(), out.terms.end(),
                               [&](const redei::Primitive &p) { return same_primitive(p, term); });
        if (it != out.terms.end())
            out.terms.erase(it);
        else
            out.terms.push_back(term);
    }
    return out;
}

std::size_t count_k_groups(const std::vector<redei::BlockDim> &dims) {
    std::size_t n = 0;
    for (const auto &d : dims) {
        if (d.is_k) {
            if (static_cast<std::ptrdiff_t>(n) != &d - dims.data())
                throw std::invalid_argument("k-scaled groups must come first");
            ++n;
        }
    }
    return n;
}

std::size_t fixed_total(const std::vector<redei::BlockDim> &dims) {
    std::size_t n = 0;
    for (const auto &d : dims)
        if (!d.is_k) n += d.fixed;
    return n;
}

}  // namespace

UnlinkedFrame UnlinkedFrame::of(const redei::RedeiExpr &expr, const std::vector<std::uint8_t> &s) {
    UnlinkedFrame f;
    f.a = count_k_groups(expr.row_dims);
    f.c = count_k_groups(expr.col_dims);
    f.b = fixed_total(expr.row_dims);
    f.d = fixed_total(expr.col_dims);
    f.sigma = expr.sigma;
    f.s = s;
    if (f.c == 0 || f.a < f.c) throw std::invalid_argument("frame: need a >= c >= 1 k-scaled groups");
    if (s.size() != expr.sigma.num_generators())
        throw std::invalid_argument("frame: sign vector length mismatch");
    return f;
}

redei::RedeiExpr normalize_high_rank(const redei::RedeiExpr &expr) {
    redei::RedeiExpr out = expr;
    arith::SquareClass minus_one;
    minus_one.set(expr.sigma.index_of(-1), true);
    for (auto &row : out.grid) {
        for (auto &blk : row) {
            redei::Block rewritten;
            for (const auto &term : blk.terms) {
                if (term.kind == redei::PrimKind::AT) {
                    rewritten.terms.push_back(redei::Primitive::a());
                    rewritten.terms.push_back(redei::Primitive::zz(minus_one, minus_one));
                    rewritten.terms.push_back(redei::Primitive::diag(minus_one));
                } else {
                    rewritten.terms.push_back(term);
                }
            }
            blk = reduce_block(rewritten);
        }
    }
    // Validate the high-part layout: A exactly on the leading c diagonal blocks.
    const std::size_t a = count_k_groups(out.row_dims), c = count_k_groups(out.col_dims);
    for (std::size_t i = 0; i < out.grid.size(); ++i) {
        for (std::size_t j = 0; j < out.grid[i].size(); ++j) {
            std::size_t n_a = 0;
            for (const auto &term : out.grid[i][j].terms)
                if (term.kind == redei::PrimKind::A) ++n_a;
            const bool want = i == j && i < c && i < a;
            if (n_a != (want ? 1u : 0u))
                throw std::invalid_argument("normalize: high part is not diag(A,...,A)");
        }
    }
    return out;
}

redei::RedeiExpr augment(const redei::RedeiExpr &expr) {
    redei::RedeiExpr out = expr;
    const std::size_t a = count_k_groups(out.row_dims);
    const std::size_t g = out.sigma.num_generators();
    const std::size_t extra = a * g;
    const std::size_t old_cols = out.col_dims.size();
    // a * #Sigma new width-1 column groups: z_p down each k-scaled row group.
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t p = 0; p < g; ++p) {
            out.col_dims.push_back(redei::BlockDim::Fixed(1));
            arith::SquareClass cls;
            cls.set(p, true);
            for (std::size_t r = 0; r < out.grid.size(); ++r) {
                redei::Block blk;
                if (r == i) blk.terms.push_back(redei::Primitive::zcol(cls));
                out.grid[r].push_back(std::move(blk));
            }
        }
    }
    // One new fixed row group carrying the identity against the new columns.
    out.row_dims.push_back(redei::BlockDim::Fixed(extra));
    std::vector<redei::Block> new_row(out.col_dims.size());
    for (std::size_t jc = 0; jc < old_cols; ++jc) {
        if (!out.col_dims[jc].is_k) {
            gf2::BitMatrix zero(extra, out.col_dims[jc].fixed);
            new_row[jc].terms.push_back(redei::Primitive::constant(std::move(zero)));
        }
    }
    for (std::size_t e = 0; e < extra; ++e) {
        gf2::BitMatrix unit(extra, 1);
        unit.set(e, 0, true);
        new_row[old_cols + e].terms.push_back(redei::Primitive::constant(std::move(unit)));
    }
    out.grid.push_back(std::move(new_row));
    return out;
}

// ---------------------------------------------------------------------------
// The unlinked-subset average
// ---------------------------------------------------------------------------

namespace {

// Affine form over <= 64 F2 variables.
struct LinForm {
    std::uint64_t mask = 0;
    bool c = false;

    LinForm &operator^=(const LinForm &o) {
        mask ^= o.mask;
        c ^= o.c;
        return *this;
    }
};

struct QuadForm {
    std::vector<std::uint64_t> rows;  // strictly upper
    std::uint64_t linear = 0;
    bool constant = false;

    explicit QuadForm(std::size_t n) : rows(n, 0) {}

    void add_linear(const LinForm &f) {
        linear ^= f.mask;
        constant ^= f.c;
    }
    void add_product(const LinForm &f, const LinForm &g) {
        std::uint64_t m = f.mask;
        while (m) {
            const std::size_t i = static_cast<std::size_t>(std::countr_zero(m));
            m &= m - 1;
            std::uint64_t w = g.mask;
            while (w) {
                const std::size_t j = static_cast<std::size_t>(std::countr_zero(w));
                w &= w - 1;
                if (i == j)
                    linear ^= 1ULL << i;
                else if (i < j)
                    rows[i] ^= 1ULL << j;
                else
                    rows[j] ^= 1ULL << i;
            }
        }
        if (f.c) { linear ^= g.mask; }
        if (g.c) { linear ^= f.mask; }
        constant ^= f.c && g.c;
    }
};

}  // namespace

Rational hb_average(const UnlinkedFrame &frame, const redei::RedeiExpr &expr_in, bool normalized) {
    const redei::RedeiExpr expr = normalized ? expr_in : normalize_high_rank(expr_in);
    if (!expr.restricted) throw std::invalid_argument("hb_average: expression must be restricted");
    const std::size_t a = frame.a, c = frame.c, b = frame.b, d = frame.d;
    if (count_k_groups(expr.row_dims) != a || count_k_groups(expr.col_dims) != c ||
        fixed_total(expr.row_dims) != b || fixed_total(expr.col_dims) != d)
        throw std::invalid_argument("hb_average: frame does not match the expression");
    const std::size_t g = frame.sigma.num_generators();
    if (frame.s.size() != g) throw std::invalid_argument("hb_average: sign vector length mismatch");
    if (c + a > 6) throw std::invalid_argument("hb_average: a + c too large");
    const std::size_t space = 1ULL << (c + a);   // F2^{c+a}
    const std::size_t lam_size = 1ULL << a;      // #Lambda = 2^a
    const std::size_t nvars = (lam_size - 1) * g + d + b;
    if (nvars > 64) throw std::invalid_argument("hb_average: too many character-sum variables");

    // Pairwise linked predicate on F2^{c+a}: bits 0..c-1 index the column
    // groups (v side), bits c..c+a-1 the row groups (w side).
    auto linked = [&](std::uint32_t x, std::uint32_t y) {
        const std::uint32_t diff = x ^ y;
        const std::uint32_t vmask = (1u << c) - 1u;
        return (std::popcount((diff & vmask) & ((diff >> c) & vmask)) & 1) != 0;
    };

    // Fixed-group offsets.
    std::vector<std::size_t> row_off(expr.row_dims.size(), 0), col_off(expr.col_dims.size(), 0);
    {
        std::size_t acc = 0;
        for (std::size_t i = 0; i < expr.row_dims.size(); ++i)
            if (!expr.row_dims[i].is_k) { row_off[i] = acc; acc += expr.row_dims[i].fixed; }
        acc = 0;
        for (std::size_t j = 0; j < expr.col_dims.size(); ++j)
            if (!expr.col_dims[j].is_k) { col_off[j] = acc; acc += expr.col_dims[j].fixed; }
    }
    const std::size_t idx_minus_one = frame.sigma.index_of(-1);

    cpp_int total = 0;
    std::vector<std::uint32_t> lambda;

    auto process_lambda = [&](const std::vector<std::uint32_t> &lam) {
        // Variables: z_{lam[i]}^{(p)} free for i < L-1; the last element is
        // s_p + sum of the others.  Then v~ (d bits) and w~ (b bits).
        auto zgen = [&](std::size_t li, std::size_t p) {
            LinForm f;
            if (li + 1 < lam.size()) {
                f.mask = 1ULL << (li * g + p);
            } else {
                for (std::size_t i = 0; i + 1 < lam.size(); ++i) f.mask |= 1ULL << (i * g + p);
                f.c = frame.s[p] != 0;
            }
            return f;
        };
        auto zcls = [&](std::size_t li, arith::SquareClass cls) {
            LinForm f;
            for (std::size_t p = 0; p < g; ++p)
                if (cls.get(p)) f ^= zgen(li, p);
            return f;
        };
        auto vvar = [&](std::size_t f) { LinForm l; l.mask = 1ULL << ((lam.size() - 1) * g + f); return l; };
        auto wvar = [&](std::size_t f) { LinForm l; l.mask = 1ULL << ((lam.size() - 1) * g + d + f); return l; };

        QuadForm q(nvars);
        // Global contribution of diag(A,...,A): for each unordered pair, the
        // sign-vector correction coefficient sum_l (lam_l + lam'_l) lam'_{c+l}
        // (order-independent on unlinked pairs) against z^{(-1)} z^{(-1)}.
        const std::uint32_t vmask = (1u << c) - 1u;
        for (std::size_t x = 0; x < lam.size(); ++x) {
            for (std::size_t y = x + 1; y < lam.size(); ++y) {
                const std::uint32_t diff = (lam[x] ^ lam[y]) & vmask;
                if (std::popcount(diff & ((lam[y] >> c) & vmask)) & 1)
                    q.add_product(zgen(x, idx_minus_one), zgen(y, idx_minus_one));
            }
        }
        // Per-block primitives.
        for (std::size_t bi = 0; bi < expr.grid.size(); ++bi) {
            for (std::size_t bj = 0; bj < expr.grid[bi].size(); ++bj) {
                const bool row_k = expr.row_dims[bi].is_k, col_k = expr.col_dims[bj].is_k;
                for (const auto &term : expr.grid[bi][bj].terms) {
                    const bool square_ok = row_k && col_k;
                    if ((term.kind == redei::PrimKind::D || term.kind == redei::PrimKind::ZZ ||
                         term.kind == redei::PrimKind::A) &&
                        !square_ok)
                        throw std::invalid_argument("hb_average: k-square primitive in a fixed block");
                    if (term.kind == redei::PrimKind::ZCol &&
                        (!row_k || col_k || expr.col_dims[bj].fixed != 1))
                        throw std::invalid_argument("hb_average: misplaced z column");
                    if (term.kind == redei::PrimKind::ZRow &&
                        (row_k || !col_k || expr.row_dims[bi].fixed != 1))
                        throw std::invalid_argument("hb_average: misplaced z row");
                    switch (term.kind) {
                        case redei::PrimKind::A:
                            break;  // handled globally (layout validated)
                        case redei::PrimKind::AT:
                            throw std::logic_error("hb_average: AT survived normalization");
                        case redei::PrimKind::D:
                            // (w^{(i)})^T D_p v^{(j)} = sum_lam lam_{c+i} lam_j z_lam^{(p)}
                            for (std::size_t li = 0; li < lam.size(); ++li)
                                if (((lam[li] >> (c + bi)) & 1u) && ((lam[li] >> bj) & 1u))
                                    q.add_linear(zcls(li, term.d1));
                            break;
                        case redei::PrimKind::ZZ: {
                            LinForm w, v;
                            for (std::size_t li = 0; li < lam.size(); ++li) {
                                if ((lam[li] >> (c + bi)) & 1u) w ^= zcls(li, term.d1);
                                if ((lam[li] >> bj) & 1u) v ^= zcls(li, term.d2);
                            }
                            q.add_product(w, v);
                            break;
                        }
                        case redei::PrimKind::ZCol: {
                            LinForm w;
                            for (std::size_t li = 0; li < lam.size(); ++li)
                                if ((lam[li] >> (c + bi)) & 1u) w ^= zcls(li, term.d1);
                            q.add_product(w, vvar(col_off[bj]));
                            break;
                        }
                        case redei::PrimKind::ZRow: {
                            LinForm v;
                            for (std::size_t li = 0; li < lam.size(); ++li)
                                if ((lam[li] >> bj) & 1u) v ^= zcls(li, term.d1);
                            q.add_product(wvar(row_off[bi]), v);
                            break;
                        }
                        case redei::PrimKind::Const:
                            if (expr.row_dims[bi].is_k || expr.col_dims[bj].is_k)
                                throw std::invalid_argument("hb_average: constant in a k-scaled block");
                            for (std::size_t r = 0; r < term.mat.rows(); ++r)
                                for (std::size_t cc = 0; cc < term.mat.cols(); ++cc)
                                    if (term.mat.get(r, cc))
                                        q.add_product(wvar(row_off[bi] + r), vvar(col_off[bj] + cc));
                            break;
                    }
                }
            }
        }
        total += character_sum(q.rows, q.linear, q.constant);
    };

    // Enumerate unlinked subsets of size 2^a by backtracking.
    auto recurse = [&](auto &&self, std::uint32_t next) -> void {
        if (lambda.size() == lam_size) {
            process_lambda(lambda);
            return;
        }
        for (std::uint32_t cand = next; cand < space; ++cand) {
            if (space - cand < lam_size - lambda.size()) break;
            bool ok = true;
            for (std::uint32_t prev : lambda)
                if (linked(prev, cand)) { ok = false; break; }
            if (!ok) continue;
            lambda.push_back(cand);
            self(self, cand + 1);
            lambda.pop_back();
        }
    };
    recurse(recurse, 0);

    // 2^{(1 - 2^a) #Sigma - b} * total
    const long long shift = (1 - static_cast<long long>(lam_size)) * static_cast<long long>(g) -
                            static_cast<long long>(b);
    return pow2q(shift) * Rational(total);
}

}  // namespace selmerlab::moments
