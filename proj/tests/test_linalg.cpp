#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fpt/matrix.hpp"
#include "oracle.hpp"

using namespace fpt;

static FpMatrix random_matrix(int r, int c, const FpFormat& f, std::mt19937_64& rng,
                              bool with_specials) {
    auto all = enumerate_all(f);
    auto fin = enumerate_finite(f);
    FpMatrix m(r, c, f);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            const auto& src = with_specials ? all : fin;
            m.set(i, j, src[rng() % src.size()]);
        }
    return m;
}

// reference product: plain left-associated fold, no shortcuts
static FpMatrix slow_mul(const FpMatrix& a, const FpMatrix& b, const FpFormat& f) {
    FpMatrix r(a.rows(), b.cols(), f);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            std::vector<Fp> terms;
            for (int k = 0; k < a.cols(); ++k) terms.push_back(fp_mul(a.at(i, k), b.at(k, j), f));
            r.set(i, j, left_sum(terms, f));
        }
    return r;
}

TEST_CASE("pack round trip") {
    for (auto [p, q] : {std::pair{2, 4}, {3, 4}, {2, 5}}) {
        auto f = make_format(p, q);
        for (const Fp& x : enumerate_all(f)) CHECK(fp_eq(unpack_fp(pack_fp(x)), x));
    }
}

TEST_CASE("mat_mul matches the plain fold") {
    auto f = make_format(2, 4);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        int r = 1 + static_cast<int>(rng() % 4);
        int k = 1 + static_cast<int>(rng() % 5);
        int c = 1 + static_cast<int>(rng() % 4);
        FpMatrix a = random_matrix(r, k, f, rng, true);
        FpMatrix b = random_matrix(k, c, f, rng, true);
        REQUIRE(mat_eq(mat_mul(a, b, f), slow_mul(a, b, f)));
    }
    // heavy zero density to exercise the skip path
    for (int trial = 0; trial < 200; ++trial) {
        FpMatrix a = random_matrix(3, 6, f, rng, true);
        FpMatrix b = random_matrix(6, 3, f, rng, true);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 6; ++j)
                if (rng() % 10 < 7) a.set(i, j, fp_zero(f));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 3; ++j)
                if (rng() % 10 < 7) b.set(i, j, fp_zero(f));
        REQUIRE(mat_eq(mat_mul(a, b, f), slow_mul(a, b, f)));
    }
}

TEST_CASE("mat_mul term order matters") {
    auto f = make_format(2, 4);
    // dotting against the all-ones vector left-folds the row, so reversing a
    // row that sums non-associatively must change the product
    auto fin = enumerate_finite(f);
    FpMatrix ones(3, 1, f);
    for (int i = 0; i < 3; ++i) ones.set(i, 0, fp_one(f));
    bool found = false;
    for (size_t i = 0; i < fin.size() && !found; i += 3)
        for (size_t j = 0; j < fin.size() && !found; j += 3)
            for (size_t k = 0; k < fin.size() && !found; k += 3) {
                FpMatrix a(1, 3, f), b(1, 3, f);
                a.set(0, 0, fin[i]); a.set(0, 1, fin[j]); a.set(0, 2, fin[k]);
                b.set(0, 0, fin[k]); b.set(0, 1, fin[j]); b.set(0, 2, fin[i]);
                if (!fp_eq(mat_mul(a, ones, f).at(0, 0), mat_mul(b, ones, f).at(0, 0)))
                    found = true;
            }
    CHECK(found);
}

TEST_CASE("add_bias and transpose") {
    auto f = make_format(2, 4);
    std::mt19937_64 rng(13);
    FpMatrix x = random_matrix(3, 4, f, rng, true);
    FpMatrix b = random_matrix(3, 1, f, rng, true);
    FpMatrix y = add_bias(x, b, f);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(fp_eq(y.at(i, j), fp_add(x.at(i, j), b.at(i, 0), f)));

    FpMatrix t = transpose(x, f);
    REQUIRE(t.rows() == 4);
    REQUIRE(t.cols() == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(fp_eq(t.at(j, i), x.at(i, j)));
    CHECK(mat_eq(transpose(t, f), x));

    CHECK_THROWS_AS(mat_mul(x, x, f), std::invalid_argument);
    CHECK_THROWS_AS(add_bias(x, random_matrix(4, 1, f, rng, false), f), std::invalid_argument);
}

TEST_CASE("permutations") {
    auto f = make_format(2, 4);
    auto id = Permutation::identity(4);
    auto sw = Permutation::swap2(4, 0, 1);
    auto cy = Permutation::cycle(4);
    CHECK(sw.then(sw).map == id.map);
    CHECK(cy.then(cy.inverse()).map == id.map);
    CHECK(cy.then(cy).then(cy).then(cy).map == id.map);

    std::mt19937_64 rng(17);
    FpMatrix x = random_matrix(2, 4, f, rng, true);
    FpMatrix xs = permute_columns(x, sw, f);
    for (int i = 0; i < 2; ++i) {
        CHECK(fp_eq(xs.at(i, 0), x.at(i, 1)));
        CHECK(fp_eq(xs.at(i, 1), x.at(i, 0)));
        CHECK(fp_eq(xs.at(i, 2), x.at(i, 2)));
    }
    CHECK(mat_eq(permute_columns(xs, sw, f), x));
    // permuting by a then by b reads through both, matching a.then(b)
    FpMatrix lhs = permute_columns(permute_columns(x, cy, f), sw, f);
    FpMatrix rhs = permute_columns(x, sw.then(cy), f);
    CHECK(mat_eq(lhs, rhs));
}

TEST_CASE("broadcast bias") {
    auto f = make_format(2, 4);
    std::mt19937_64 rng(23);
    FpMatrix b = random_matrix(3, 1, f, rng, true);
    FpMatrix wide = broadcast_bias(b, 5, f);
    REQUIRE(wide.rows() == 3);
    REQUIRE(wide.cols() == 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) CHECK(fp_eq(wide.at(i, j), b.at(i, 0)));
    // adding a broadcast bias matches add_bias
    FpMatrix x = random_matrix(3, 5, f, rng, true);
    CHECK(mat_eq(mat_add(x, wide, f), add_bias(x, b, f)));
    CHECK_THROWS_AS(broadcast_bias(x, 2, f), std::invalid_argument);
}

TEST_CASE("rounded products are not permutation equivariant") {
    // Multiplication by an all-ones matrix sums each row.  Reordering the
    // summands through a column 3-cycle changes the rounded result:
    //   (1.25 + 1.25) + 1 = 2.5 + 1 -> 3.5   but   (1.25 + 1) + 1.25 -> 3.0
    // A transposition of the first two columns can never do this, because the
    // first two terms of a left fold commute, so the witness needs a 3-cycle.
    auto f = make_format(2, 4);
    FpMatrix v(1, 3, f);
    v.set(0, 0, parse_fp("1.25", f));
    v.set(0, 1, parse_fp("1.25", f));
    v.set(0, 2, fp_one(f));
    FpMatrix sig(3, 3, f);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) sig.set(i, j, fp_one(f));
    auto cyc = Permutation::cycle(3);

    FpMatrix plain = mat_mul(v, sig, f);
    // sigma is invariant under conjugating by the cycle, so this is (pi V) (pi sigma pi^-1);
    // equivariance would force it to equal pi (V sigma), whose single row sum is plain's.
    FpMatrix permuted = mat_mul(permute_columns(v, cyc, f), sig, f);
    CHECK(fp_eq(plain.at(0, 0), parse_fp("3.5", f)));
    CHECK(fp_eq(permuted.at(0, 0), parse_fp("3", f)));
    CHECK_FALSE(mat_eq(plain, permuted));
}
