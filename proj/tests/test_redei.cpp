#include <doctest.h>

#include <set>
#include <string>

#include "selmerlab/redei.hpp"

using namespace selmerlab;
using namespace selmerlab::redei;
using arith::OmegaPoint;
using arith::PlaceSet;
using arith::SquareClass;
using gf2::BitMatrix;
using gf2::BitVec;

namespace {

RedeiExpr single_block(const PlaceSet &sigma, std::vector<Primitive> terms, bool restricted = true) {
    RedeiExpr e;
    e.sigma = sigma;
    e.restricted = restricted;
    e.row_dims = {BlockDim::K()};
    e.col_dims = {BlockDim::K()};
    e.grid = {{Block{std::move(terms)}}};
    return e;
}

std::string omega_key(const OmegaPoint &w) {
    std::string key = w.a.to_string();
    for (const auto &z : w.z) key += "|" + z.to_string();
    return key;
}

}  // namespace

TEST_CASE("family classification") {
    FamilyClass a = classify_family(1, -1);
    CHECK(a.type == FamilyType::A);
    CHECK(a.d == std::array<long long, 3>{2, -1, 2});

    FamilyClass b = classify_family(1, -3);
    CHECK(b.type == FamilyType::B);
    CHECK(b.d == std::array<long long, 3>{4, -3, 12});
    CHECK(b.is_square == std::array<bool, 3>{true, false, false});

    FamilyClass c = classify_family(9, 25);
    CHECK(c.type == FamilyType::C);
    CHECK(c.d == std::array<long long, 3>{-144, 225, 400});
    CHECK(c.is_square == std::array<bool, 3>{false, true, true});
}

TEST_CASE("eval reproduces the symbol matrix and the transpose identity") {
    PlaceSet sigma;
    OmegaPoint w = arith::omega_of(105, {3, 5, 7}, sigma);
    w.check();

    RedeiExpr ea = single_block(sigma, {Primitive::a()});
    CHECK(eval(ea, w) == w.a);
    RedeiExpr eat = single_block(sigma, {Primitive::at()});
    CHECK(eval(eat, w) == w.a.transpose());

    // A^T = A + z_{-1} z_{-1}^T + D_{-1} on every real configuration.
    SquareClass m1 = arith::square_class_of(-1, sigma);
    RedeiExpr zero = single_block(
        sigma, {Primitive::a(), Primitive::at(), Primitive::zz(m1, m1), Primitive::diag(m1)});
    CHECK(eval(zero, w) == BitMatrix(3, 3));
}

TEST_CASE("eval block layout and views") {
    PlaceSet sigma;
    OmegaPoint w = arith::omega_of(15, {3, 5}, sigma);
    SquareClass two = arith::square_class_of(2, sigma);

    RedeiExpr e;
    e.sigma = sigma;
    e.restricted = true;
    e.row_dims = {BlockDim::K(), BlockDim::Fixed(1)};
    e.col_dims = {BlockDim::K(), BlockDim::Fixed(1)};
    e.grid = {{Block{{Primitive::a()}}, Block{{Primitive::zcol(two)}}},
              {Block{{Primitive::zrow(two)}}, Block{{Primitive::constant(BitMatrix::from_strings({"1"}))}}}};
    BitMatrix M = eval(e, w);
    CHECK(M == BitMatrix::from_strings({"111", "111", "111"}));

    // Unrestricted view drops the last prime's row and column.
    RedeiExpr eu = single_block(sigma, {Primitive::a()}, /*restricted=*/false);
    BitMatrix Mu = eval(eu, w);
    CHECK(Mu.rows() == 1);
    CHECK(Mu.get(0, 0) == w.a.get(0, 0));
}

TEST_CASE("sampling hits every point of a small omega space") {
    PlaceSet sigma;
    std::vector<std::uint8_t> s = {0, 1};
    CounterRng rng(123, 0);
    std::set<std::string> seen;
    for (int i = 0; i < 2000; ++i) {
        OmegaPoint w = sample_omega(2, sigma, s, rng);
        w.check();
        CHECK(w.sign_vector() == s);
        seen.insert(omega_key(w));
    }
    // Free coordinates: one matrix bit and two truncated sign bits.
    CHECK(seen.size() == 8);
}

TEST_CASE("extension and projection are section and retraction") {
    PlaceSet sigma({3});
    std::vector<std::uint8_t> s = {1, 0, 1};
    CounterRng rng(9, 1);
    for (int trial = 0; trial < 20; ++trial) {
        OmegaPoint w = sample_omega(4, sigma, s, rng);
        OmegaPoint up = extend_omega(w, s, rng);
        CHECK(up.k == 5);
        up.check();
        CHECK(up.sign_vector() == s);
        OmegaPoint back = project_omega(up, s);
        CHECK(back.a == w.a);
        for (std::size_t g = 0; g < w.z.size(); ++g) CHECK(back.z[g] == w.z[g]);
        // Free coordinates survive the extension.
        for (std::size_t i = 0; i + 1 < w.k; ++i)
            for (std::size_t j = i; j + 1 < w.k; ++j) CHECK(up.a.get(i, j) == w.a.get(i, j));
    }
}

TEST_CASE("a real configuration is fixed by project after extend in law") {
    // project is defined on any valid point, including arithmetic ones.
    PlaceSet sigma;
    OmegaPoint w = arith::omega_of(105, {3, 5, 7}, sigma);
    OmegaPoint down = project_omega(w, w.sign_vector());
    down.check();
    CHECK(down.k == 2);
    CHECK(down.a.get(0, 1) == w.a.get(0, 1));
}

TEST_CASE("maximal rank of low-rank expressions") {
    PlaceSet sigma;
    SquareClass m1 = arith::square_class_of(-1, sigma);
    SquareClass two = arith::square_class_of(2, sigma);

    CHECK(low_rank_max_rank(single_block(sigma, {Primitive::zz(m1, two)})) == 1);

    RedeiExpr e;
    e.sigma = sigma;
    e.restricted = true;
    e.row_dims = {BlockDim::K()};
    e.col_dims = {BlockDim::Fixed(1), BlockDim::Fixed(1)};
    e.grid = {{Block{{Primitive::zcol(m1)}}, Block{{Primitive::zcol(two)}}}};
    CHECK(low_rank_max_rank(e) == 2);

    // The unrestricted view uses the truncated vectors; same answer.
    e.restricted = false;
    CHECK(low_rank_max_rank(e) == 2);

    CHECK_THROWS(low_rank_max_rank(single_block(sigma, {Primitive::a()})));
}

TEST_CASE("conditional span probability agrees with hand counts") {
    auto vec = [](std::initializer_list<int> bits) {
        BitVec v(2);
        std::size_t i = 0;
        for (int b : bits) v.set(i++, b);
        return v;
    };
    SpanInstance full_w;
    full_w.weight = Rational(1);
    full_w.v_basis = {vec({1, 0})};
    full_w.w_basis = {vec({1, 0}), vec({0, 1})};
    CHECK(conditional_span_probability({full_w}, 2) == Rational(1, 2));

    SpanInstance equal;
    equal.weight = Rational(1, 3);
    equal.v_basis = {vec({1, 1})};
    equal.w_basis = {vec({1, 1})};
    SpanInstance disjoint;
    disjoint.weight = Rational(2, 3);
    disjoint.v_basis = {vec({1, 0})};
    disjoint.w_basis = {vec({0, 1})};
    // 1/3 * 1 + 2/3 * 1/2 = 2/3.
    CHECK(conditional_span_probability({equal, disjoint}, 2) == Rational(2, 3));
}
