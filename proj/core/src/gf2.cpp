#include "selmerlab/gf2.hpp"

#include <bit>
#include <cassert>
#include <stdexcept>

namespace selmerlab::gf2 {

BitVec &BitVec::operator^=(const BitVec &other) {
    if (size_ != other.size_) throw std::invalid_argument("BitVec size mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
}

bool BitVec::is_zero() const {
    for (Word w : words_)
        if (w) return false;
    return true;
}

std::size_t BitVec::weight() const {
    std::size_t total = 0;
    for (Word w : words_) total += std::popcount(w);
    return total;
}

std::string BitVec::to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
        if (get(i)) s[i] = '1';
    return s;
}

BitMatrix BitMatrix::identity(std::size_t n) {
    BitMatrix M(n, n);
    for (std::size_t i = 0; i < n; ++i) M.set(i, i, true);
    return M;
}

BitMatrix BitMatrix::from_strings(const std::vector<std::string> &rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows[0].size() : 0;
    BitMatrix M(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) throw std::invalid_argument("ragged row strings");
        for (std::size_t j = 0; j < c; ++j)
            if (rows[i][j] == '1') M.set(i, j, true);
    }
    return M;
}

BitVec BitMatrix::row(std::size_t r) const {
    BitVec v(cols_);
    for (std::size_t w = 0; w < words_per_row_; ++w) v.words()[w] = data_[r * words_per_row_ + w];
    return v;
}

void BitMatrix::xor_row_from(std::size_t dst, std::size_t src) {
    Word *d = data_.data() + dst * words_per_row_;
    const Word *s = data_.data() + src * words_per_row_;
    for (std::size_t w = 0; w < words_per_row_; ++w) d[w] ^= s[w];
}

void BitMatrix::xor_row_vec(std::size_t dst, const BitVec &v) {
    if (v.size() != cols_) throw std::invalid_argument("row length mismatch");
    Word *d = data_.data() + dst * words_per_row_;
    for (std::size_t w = 0; w < words_per_row_; ++w) d[w] ^= v.words()[w];
}

BitMatrix BitMatrix::transpose() const {
    BitMatrix T(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        const Word *src = data_.data() + r * words_per_row_;
        for (std::size_t w = 0; w < words_per_row_; ++w) {
            Word word = src[w];
            while (word) {
                std::size_t bit = std::countr_zero(word);
                word &= word - 1;
                T.set(w * kWordBits + bit, r, true);
            }
        }
    }
    return T;
}

BitMatrix BitMatrix::operator+(const BitMatrix &other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw std::invalid_argument("BitMatrix shape mismatch in +");
    BitMatrix R = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) R.data_[i] ^= other.data_[i];
    return R;
}

BitMatrix BitMatrix::operator*(const BitMatrix &other) const {
    if (cols_ != other.rows_) throw std::invalid_argument("BitMatrix shape mismatch in *");
    BitMatrix R(rows_, other.cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        const Word *src = data_.data() + r * words_per_row_;
        Word *dst = R.data_.data() + r * R.words_per_row_;
        for (std::size_t w = 0; w < words_per_row_; ++w) {
            Word word = src[w];
            while (word) {
                std::size_t k = w * kWordBits + std::countr_zero(word);
                word &= word - 1;
                const Word *ok = other.data_.data() + k * other.words_per_row_;
                for (std::size_t ww = 0; ww < R.words_per_row_; ++ww) dst[ww] ^= ok[ww];
            }
        }
    }
    return R;
}

BitVec BitMatrix::apply(const BitVec &v) const {
    if (v.size() != cols_) throw std::invalid_argument("BitMatrix/vector shape mismatch");
    BitVec out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        const Word *src = data_.data() + r * words_per_row_;
        Word acc = 0;
        for (std::size_t w = 0; w < words_per_row_; ++w) acc ^= src[w] & v.words()[w];
        out.set(r, std::popcount(acc) & 1u);
    }
    return out;
}

BitMatrix BitMatrix::submatrix(const std::vector<std::size_t> &row_idx,
                               const std::vector<std::size_t> &col_idx) const {
    for (std::size_t i = 1; i < row_idx.size(); ++i)
        if (row_idx[i] <= row_idx[i - 1]) throw std::invalid_argument("row indices not ascending");
    for (std::size_t j = 1; j < col_idx.size(); ++j)
        if (col_idx[j] <= col_idx[j - 1]) throw std::invalid_argument("col indices not ascending");
    if (!row_idx.empty() && row_idx.back() >= rows_) throw std::out_of_range("row index");
    if (!col_idx.empty() && col_idx.back() >= cols_) throw std::out_of_range("col index");
    BitMatrix S(row_idx.size(), col_idx.size());
    for (std::size_t i = 0; i < row_idx.size(); ++i)
        for (std::size_t j = 0; j < col_idx.size(); ++j)
            if (get(row_idx[i], col_idx[j])) S.set(i, j, true);
    return S;
}

std::string BitMatrix::to_string() const {
    std::string s;
    s.reserve(rows_ * (cols_ + 1));
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) s.push_back(get(r, c) ? '1' : '0');
        s.push_back('\n');
    }
    return s;
}

std::size_t rank_inplace(BitMatrix &M) {
    std::size_t rank = 0;
    const std::size_t wpr = M.words_per_row_;
    for (std::size_t col = 0; col < M.cols_ && rank < M.rows_; ++col) {
        const std::size_t cw = col / kWordBits;
        const Word mask = Word(1) << (col % kWordBits);
        // Find a pivot row at or below `rank`.
        std::size_t pivot = rank;
        while (pivot < M.rows_ && !(M.data_[pivot * wpr + cw] & mask)) ++pivot;
        if (pivot == M.rows_) continue;
        if (pivot != rank)
            for (std::size_t w = 0; w < wpr; ++w)
                std::swap(M.data_[pivot * wpr + w], M.data_[rank * wpr + w]);
        const Word *prow = M.data_.data() + rank * wpr;
        for (std::size_t r = rank + 1; r < M.rows_; ++r) {
            Word *row = M.data_.data() + r * wpr;
            if (row[cw] & mask)
                for (std::size_t w = cw; w < wpr; ++w) row[w] ^= prow[w];
        }
        ++rank;
    }
    return rank;
}

std::size_t rank(const BitMatrix &M) {
    BitMatrix copy = M;
    return rank_inplace(copy);
}

std::vector<BitVec> kernel_basis(const BitMatrix &M) {
    // Column-reduce the transpose, tracking the transformation: rows of T that
    // reduce to zero give kernel vectors of M.
    const std::size_t n = M.cols();
    BitMatrix T = M.transpose();            // n x rows
    BitMatrix E = BitMatrix::identity(n);   // records row ops on T
    std::size_t r = 0;
    for (std::size_t col = 0; col < T.cols() && r < n; ++col) {
        std::size_t pivot = r;
        while (pivot < n && !T.get(pivot, col)) ++pivot;
        if (pivot == n) continue;
        if (pivot != r) {
            // Swap rows in both T and E.
            for (std::size_t c = 0; c < T.cols(); ++c) {
                bool a = T.get(r, c), b = T.get(pivot, c);
                T.set(r, c, b);
                T.set(pivot, c, a);
            }
            for (std::size_t c = 0; c < n; ++c) {
                bool a = E.get(r, c), b = E.get(pivot, c);
                E.set(r, c, b);
                E.set(pivot, c, a);
            }
        }
        for (std::size_t rr = 0; rr < n; ++rr) {
            if (rr != r && T.get(rr, col)) {
                T.xor_row_from(rr, r);
                E.xor_row_from(rr, r);
            }
        }
        ++r;
    }
    std::vector<BitVec> basis;
    for (std::size_t rr = r; rr < n; ++rr) basis.push_back(E.row(rr));
    // Rows >= r of T are zero: sanity.
    for (std::size_t rr = r; rr < n; ++rr) assert(T.row(rr).is_zero());
    return basis;
}

bool in_span(const BitMatrix &M, const BitVec &v) {
    if (v.size() != M.rows()) throw std::invalid_argument("in_span: length(v) != rows(M)");
    if (v.is_zero()) return true;
    // rank([M | v]) as column spaces: compare rank of M^T with rank of [M^T; v].
    BitMatrix T = M.transpose();
    std::size_t base = rank(T);
    BitMatrix Taug(T.rows() + 1, T.cols());
    for (std::size_t r = 0; r < T.rows(); ++r)
        for (std::size_t c = 0; c < T.cols(); ++c)
            if (T.get(r, c)) Taug.set(r, c, true);
    for (std::size_t c = 0; c < T.cols(); ++c)
        if (v.get(c)) Taug.set(T.rows(), c, true);
    return rank_inplace(Taug) == base;
}

bool in_span(const std::vector<BitVec> &basis, const BitVec &v) {
    if (basis.empty()) return v.is_zero();
    BitMatrix M(basis.size() + 1, basis[0].size());
    for (std::size_t i = 0; i < basis.size(); ++i) M.xor_row_vec(i, basis[i]);
    std::size_t base = rank(M);
    M.xor_row_vec(basis.size(), v);
    return rank_inplace(M) == base;
}

std::size_t rank(const std::vector<BitVec> &vectors) {
    if (vectors.empty()) return 0;
    BitMatrix M(vectors.size(), vectors[0].size());
    for (std::size_t i = 0; i < vectors.size(); ++i) M.xor_row_vec(i, vectors[i]);
    return rank_inplace(M);
}

BitMatrix assemble(const std::vector<std::vector<BitMatrix>> &blocks) {
    if (blocks.empty()) return BitMatrix();
    const std::size_t grid_cols = blocks[0].size();
    std::vector<std::size_t> row_heights(blocks.size()), col_widths(grid_cols, SIZE_MAX);
    std::size_t total_rows = 0, total_cols = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].size() != grid_cols) throw std::invalid_argument("ragged block grid");
        row_heights[i] = blocks[i][0].rows();
        for (std::size_t j = 0; j < grid_cols; ++j) {
            if (blocks[i][j].rows() != row_heights[i])
                throw std::invalid_argument("inconsistent block heights");
            if (col_widths[j] == SIZE_MAX)
                col_widths[j] = blocks[i][j].cols();
            else if (blocks[i][j].cols() != col_widths[j])
                throw std::invalid_argument("inconsistent block widths");
        }
        total_rows += row_heights[i];
    }
    for (std::size_t j = 0; j < grid_cols; ++j) total_cols += col_widths[j];
    BitMatrix M(total_rows, total_cols);
    std::size_t row_off = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        std::size_t col_off = 0;
        for (std::size_t j = 0; j < grid_cols; ++j) {
            const BitMatrix &B = blocks[i][j];
            for (std::size_t r = 0; r < B.rows(); ++r)
                for (std::size_t c = 0; c < B.cols(); ++c)
                    if (B.get(r, c)) M.set(row_off + r, col_off + c, true);
            col_off += col_widths[j];
        }
        row_off += row_heights[i];
    }
    return M;
}

bool solve(const BitMatrix &M, const BitVec &b, BitVec &x) {
    if (b.size() != M.rows()) throw std::invalid_argument("solve: shape mismatch");
    // Gauss-Jordan on [M | b].
    BitMatrix A(M.rows(), M.cols() + 1);
    for (std::size_t r = 0; r < M.rows(); ++r) {
        for (std::size_t c = 0; c < M.cols(); ++c)
            if (M.get(r, c)) A.set(r, c, true);
        if (b.get(r)) A.set(r, M.cols(), true);
    }
    std::vector<std::size_t> pivot_col;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < M.cols() && rank < A.rows(); ++col) {
        std::size_t pivot = rank;
        while (pivot < A.rows() && !A.get(pivot, col)) ++pivot;
        if (pivot == A.rows()) continue;
        if (pivot != rank)
            for (std::size_t c = 0; c <= M.cols(); ++c) {
                bool u = A.get(rank, c), v = A.get(pivot, c);
                A.set(rank, c, v);
                A.set(pivot, c, u);
            }
        for (std::size_t r = 0; r < A.rows(); ++r)
            if (r != rank && A.get(r, col)) A.xor_row_from(r, rank);
        pivot_col.push_back(col);
        ++rank;
    }
    for (std::size_t r = rank; r < A.rows(); ++r)
        if (A.get(r, M.cols())) return false;  // 0 = 1 row: inconsistent
    x = BitVec(M.cols());
    for (std::size_t i = 0; i < rank; ++i)
        if (A.get(i, M.cols())) x.set(pivot_col[i], true);
    return true;
}

}  // namespace selmerlab::gf2
