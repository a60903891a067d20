// Dense linear algebra over the two-element field.
//
// BitMatrix packs each row into 64-bit words (row-major); everything the
// rest of the library needs -- rank, corank, kernels, span membership,
// block assembly, submatrix extraction -- is built on word-wide XOR
// elimination.  All padding bits beyond `cols` are kept zero so that
// whole-word comparisons and popcounts are safe.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace selmerlab::gf2 {

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

// A vector over F2, bit-packed like a single matrix row.
class BitVec {
  public:
    BitVec() = default;
    explicit BitVec(std::size_t size) : size_(size), words_((size + kWordBits - 1) / kWordBits, 0) {}

    std::size_t size() const { return size_; }
    bool get(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1u; }
    void set(std::size_t i, bool v) {
        Word mask = Word(1) << (i % kWordBits);
        if (v)
            words_[i / kWordBits] |= mask;
        else
            words_[i / kWordBits] &= ~mask;
    }
    void flip(std::size_t i) { words_[i / kWordBits] ^= Word(1) << (i % kWordBits); }

    BitVec &operator^=(const BitVec &other);
    bool operator==(const BitVec &other) const = default;
    bool is_zero() const;
    // Number of set bits.
    std::size_t weight() const;

    const std::vector<Word> &words() const { return words_; }
    std::vector<Word> &words() { return words_; }

    std::string to_string() const;  // '0'/'1' characters, index 0 first

  private:
    std::size_t size_ = 0;
    std::vector<Word> words_;
};

class BitMatrix {
  public:
    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), words_per_row_((cols + kWordBits - 1) / kWordBits),
          data_(rows * words_per_row_, 0) {}

    static BitMatrix identity(std::size_t n);
    // Builds a matrix from ASCII rows of '0'/'1' (test convenience).
    static BitMatrix from_strings(const std::vector<std::string> &rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    bool get(std::size_t r, std::size_t c) const {
        return (data_[r * words_per_row_ + c / kWordBits] >> (c % kWordBits)) & 1u;
    }
    void set(std::size_t r, std::size_t c, bool v) {
        Word mask = Word(1) << (c % kWordBits);
        Word &w = data_[r * words_per_row_ + c / kWordBits];
        if (v)
            w |= mask;
        else
            w &= ~mask;
    }
    void flip(std::size_t r, std::size_t c) {
        data_[r * words_per_row_ + c / kWordBits] ^= Word(1) << (c % kWordBits);
    }

    bool operator==(const BitMatrix &other) const = default;

    // Row r as a BitVec copy / XOR of a packed row into row r.
    BitVec row(std::size_t r) const;
    void xor_row_from(std::size_t dst, std::size_t src);
    void xor_row_vec(std::size_t dst, const BitVec &v);

    BitMatrix transpose() const;
    BitMatrix operator+(const BitMatrix &other) const;  // XOR
    BitMatrix operator*(const BitMatrix &other) const;
    BitVec apply(const BitVec &v) const;  // M v

    // Submatrix extraction; index sets must be sorted ascending, no duplicates.
    BitMatrix submatrix(const std::vector<std::size_t> &row_idx,
                        const std::vector<std::size_t> &col_idx) const;

    std::string to_string() const;  // one '0'/'1' line per row

  private:
    std::size_t rows_ = 0, cols_ = 0, words_per_row_ = 0;
    std::vector<Word> data_;

    friend std::size_t rank_inplace(BitMatrix &M);
};

// Row rank by elimination.  `rank` works on a copy and leaves M untouched;
// `rank_inplace` destroys M (hot loops).
std::size_t rank(const BitMatrix &M);
std::size_t rank_inplace(BitMatrix &M);
inline std::size_t corank(const BitMatrix &M) { return M.cols() - rank(M); }

// Basis of the right kernel {v : Mv = 0}; size equals corank(M).
std::vector<BitVec> kernel_basis(const BitMatrix &M);

// True iff v lies in the span of the columns of M.  v must have length rows(M).
bool in_span(const BitMatrix &M, const BitVec &v);

// True iff v lies in the span of the given vectors (all of equal length).
bool in_span(const std::vector<BitVec> &basis, const BitVec &v);

// Rank of a set of vectors viewed as rows.
std::size_t rank(const std::vector<BitVec> &vectors);

// Concatenates a rectangular grid of blocks.  Every block in grid row i must
// share its row count; every block in grid column j its column count.
BitMatrix assemble(const std::vector<std::vector<BitMatrix>> &blocks);

// Solves M x = b; returns false if inconsistent.  x receives one solution.
bool solve(const BitMatrix &M, const BitVec &b, BitVec &x);

}  // namespace selmerlab::gf2
