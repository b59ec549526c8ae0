#include "test_support.hpp"

using namespace estar;

namespace {

BasePoly rand_poly(std::mt19937& rng, int n, int max_deg = 3) {
    BasePoly p(n);
    int terms = 1 + (int)(rng() % 4);
    for (int t = 0; t < terms; ++t) {
        Expo e(n, 0);
        int d = (int)(rng() % (max_deg + 1));
        for (int j = 0; j < d && n > 0; ++j) e[rng() % n] += 1;
        long num = (long)(rng() % 11) - 5;
        p.add_term(e, Scalar(num, 1 + (long)(rng() % 3)));
    }
    return p;
}

}  // namespace

TEST_CASE("scalar canonical form") {
    CHECK(Scalar(2, 6) == Scalar(1, 3));
    CHECK(Scalar(-2, -6) == Scalar(1, 3));
    CHECK(Scalar(2, -6) == Scalar(-1, 3));
    CHECK((Scalar(1, 3) + Scalar(1, 6)).str() == "1/2");
    CHECK(Scalar(0).is_zero());
    CHECK_THROWS_AS(Scalar(1, 0), input_error);
    CHECK_THROWS_AS(Scalar(1) / Scalar(0), input_error);
}

TEST_CASE("poly_mul examples") {
    BasePoly q1 = BasePoly::variable(2, 1);
    BasePoly q2 = BasePoly::variable(2, 2);
    BasePoly one(2, Scalar(1));

    CHECK(poly_mul(q1, q1).str() == "q1^2");
    CHECK(poly_mul(q1 + one, q1 - one) == q1 * q1 - one);
    BasePoly two_q1q2 = Scalar(2) * (q1 * q2);
    CHECK(poly_mul(two_q1q2, BasePoly(2, Scalar(1, 2))) == q1 * q2);
}

TEST_CASE("poly_mul arity mismatch is an input error") {
    CHECK_THROWS_AS(poly_mul(BasePoly::variable(1, 1), BasePoly::variable(2, 1)), input_error);
}

TEST_CASE("poly_diff examples") {
    BasePoly q1 = BasePoly::variable(2, 1);
    BasePoly q2 = BasePoly::variable(2, 2);
    CHECK(poly_diff(q1 * q1, 1) == Scalar(2) * q1);
    CHECK(poly_diff(q1, 2).is_zero());
    CHECK(poly_diff(q1 * q2 + BasePoly(2, Scalar(3)), 1) == q2);
    CHECK_THROWS_AS(poly_diff(q1, 3), input_error);
    CHECK_THROWS_AS(poly_diff(q1, 0), input_error);
}

TEST_CASE("ring axioms on random triples") {
    std::mt19937 rng(42);
    for (int i = 0; i < 40; ++i) {
        BasePoly a = rand_poly(rng, 2), b = rand_poly(rng, 2), c = rand_poly(rng, 2);
        CHECK((a * b) * c == a * (b * c));
        CHECK(a * (b + c) == a * b + a * c);
        CHECK(a * b == b * a);
        CHECK((a + b) + c == a + (b + c));
    }
}

TEST_CASE("poly_diff is a derivation") {
    std::mt19937 rng(43);
    for (int i = 0; i < 30; ++i) {
        BasePoly a = rand_poly(rng, 3), b = rand_poly(rng, 3);
        for (int j = 1; j <= 3; ++j)
            CHECK(poly_diff(a * b, j) == poly_diff(a, j) * b + a * poly_diff(b, j));
    }
}

TEST_CASE("series_truncate on nu-graded objects") {
    PolySection s(0, 1);
    s.add(0, {0}, BasePoly(0, Scalar(1)));
    s.add(1, {0}, BasePoly(0, Scalar(1)));
    s.add(2, {0}, BasePoly(0, Scalar(1)));
    NuTruncation t1(5, 1);
    PolySection cut = series_truncate(s, t1);
    CHECK(cut.max_nu() == 1);
    CHECK(series_truncate(cut, t1) == cut);  // idempotent

    PolySection zero(0, 1);
    CHECK(series_truncate(zero, t1) == zero);

    PolySection nu3(0, 1);
    nu3.add(3, {0}, BasePoly(0, Scalar(1)));
    NuTruncation t3(5, 3);
    CHECK(series_truncate(nu3, t3) == nu3);
}

TEST_CASE("truncation invariants") {
    CHECK_THROWS_AS(NuTruncation(2, 3), input_error);  // T < L
    CHECK_THROWS_AS(NuTruncation(-1, -1), input_error);
}

TEST_CASE("polynomial text round trip") {
    std::mt19937 rng(44);
    for (int i = 0; i < 25; ++i) {
        BasePoly p = rand_poly(rng, 2);
        CHECK(parse_base_poly(p.str(), 2) == p);
    }
    CHECK(parse_base_poly("(q1+1)^2 - q1^2 - 2*q1", 1) == BasePoly(1, Scalar(1)));
    CHECK(parse_base_poly("-3/2*q2", 2) == Scalar(-3, 2) * BasePoly::variable(2, 2));
    CHECK_THROWS_AS(parse_base_poly("q3", 2), input_error);
    CHECK_THROWS_AS(parse_base_poly("q1 +", 2), input_error);
    CHECK_THROWS_AS(parse_base_poly("q1 ^ q1", 2), input_error);
    CHECK_THROWS_AS(parse_base_poly("2 @ 3", 0), input_error);
}

TEST_CASE("canonical printing is sorted and stable") {
    BasePoly p(2);
    p.add_term({0, 1}, Scalar(1));
    p.add_term({1, 0}, Scalar(-2));
    p.add_term({0, 0}, Scalar(1, 2));
    BasePoly q(2);
    q.add_term({0, 0}, Scalar(1, 2));
    q.add_term({1, 0}, Scalar(-2));
    q.add_term({0, 1}, Scalar(1));
    CHECK(p.str() == q.str());
    CHECK(p.str() == "1/2 + q2 - 2*q1");
}
