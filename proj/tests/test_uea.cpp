#include "test_support.hpp"

using namespace estar;
using ts::Fixture;

namespace {

const NuTruncation T85(6, 5);

UEAWord word_of(int N, std::initializer_list<int> gens) {
    UEAWord w = UEAWord::one(N);
    for (int g : gens) w = w * UEAWord::generator(N, g - 1);
    return w;
}

}  // namespace

TEST_CASE("normal_order examples") {
    Fixture ab("abelian2");
    auto c_ab = point_structure_constants(*ab.chart);
    UEAWord w = word_of(2, {2, 1});
    UEAWord nf = normal_order(w, c_ab);
    CHECK(nf == word_of(2, {1, 2}));

    Fixture h("heis3");
    auto c = point_structure_constants(*h.chart);
    // e2 <> e1 = e1 e2 + nu e3
    UEAWord nf2 = normal_order(word_of(3, {2, 1}), c);
    UEAWord expected = word_of(3, {1, 2});
    expected.add(UEAKey{{2}, 1}, Scalar(1));
    CHECK(nf2 == expected);

    // e2 <> e2 <> e1 = e1 e2^2 + 2 nu e2 e3
    UEAWord nf3 = normal_order(word_of(3, {2, 2, 1}), c);
    UEAWord expected3 = word_of(3, {1, 2, 2});
    expected3.add(UEAKey{{1, 2}, 1}, Scalar(2));
    CHECK(nf3 == expected3);
}

TEST_CASE("normal_order requires a point base") {
    Fixture tr1("tangent_r1");
    CHECK_THROWS_AS(point_structure_constants(*tr1.chart), input_error);
}

TEST_CASE("normal_order is confluent (diamond test)") {
    std::mt19937 rng(91);
    for (const auto& name : {"heis3", "so3", "axb"}) {
        Fixture fx(name);
        auto c = point_structure_constants(*fx.chart);
        for (int i = 0; i < 100; ++i) {
            int len = 1 + (int)(rng() % 5);
            UEAWord w = UEAWord::one(fx.N);
            for (int j = 0; j < len; ++j)
                w = w * UEAWord::generator(fx.N, (int)(rng() % fx.N));
            UEAWord a = normal_order(w, c, 0);
            UEAWord b = normal_order(w, c, 1);
            UEAWord d = normal_order(w, c, 2, rng());
            CHECK(a == b);
            CHECK(a == d);
        }
    }
}

TEST_CASE("induced PBW product is associative at bounded length") {
    std::mt19937 rng(92);
    for (const auto& name : {"heis3", "so3"}) {
        Fixture fx(name);
        auto c = point_structure_constants(*fx.chart);
        for (int i = 0; i < 30; ++i) {
            auto rand_word = [&]() {
                int len = (int)(rng() % 3);
                UEAWord w = UEAWord::generator(fx.N, (int)(rng() % fx.N));
                for (int j = 0; j < len; ++j)
                    w = w * UEAWord::generator(fx.N, (int)(rng() % fx.N));
                return normal_order(w, c);
            };
            UEAWord x = rand_word(), y = rand_word(), z = rand_word();
            CHECK(normal_order(normal_order(x * y, c) * z, c) ==
                  normal_order(x * normal_order(y * z, c), c));
        }
    }
}

TEST_CASE("phi_check relations and injectivity") {
    for (const auto& name : {"abelian2", "heis3", "so3", "axb"}) {
        Fixture fx(name);
        auto sol = solve_r(fx.setup(Scalar(1, 2), T85));
        CheckReport rep = phi_check(*sol, 3);
        INFO(name << "\n" << rep.str());
        CHECK(rep.all_pass());
    }
}

TEST_CASE("phi_check preconditions") {
    Fixture h("heis3");
    auto sol0 = solve_r(h.setup(Scalar(0), T85));
    CHECK_THROWS_AS(phi_check(*sol0, 2), input_error);  // needs Weyl ordering
    auto solB = solve_r(h.setup(Scalar(1, 2), T85, h.two_form(0, 1, 2, "1")));
    CHECK_THROWS_AS(phi_check(*solB, 2), input_error);  // needs B = 0
}

TEST_CASE("rank deficiency is reported with a kernel vector") {
    // rows: w0 = e1, w1 = e2, w2 = e1 + e2 image-colliding fake matrix
    std::vector<std::vector<Scalar>> m = {
        {Scalar(1), Scalar(0)}, {Scalar(0), Scalar(1)}, {Scalar(1), Scalar(1)}};
    std::vector<Scalar> kernel;
    CHECK(rational_rank(m, &kernel) == 2);
    REQUIRE(kernel.size() == 3);
    // the kernel vector combines the rows to zero
    for (int col = 0; col < 2; ++col) {
        Scalar acc(0);
        for (int row = 0; row < 3; ++row) acc += kernel[row] * m[row][col];
        CHECK(acc.is_zero());
    }
}

TEST_CASE("symmetrisation and its inverse are mutually inverse") {
    std::mt19937 rng(93);
    for (const auto& name : {"heis3", "so3"}) {
        Fixture fx(name);
        auto c = point_structure_constants(*fx.chart);
        for (int i = 0; i < 20; ++i) {
            PolySection f(0, fx.N);
            std::vector<int> b(fx.N, 0);
            int d = 1 + (int)(rng() % 3);
            for (int j = 0; j < d; ++j) b[rng() % fx.N] += 1;
            f.add((int)(rng() % 2), b, BasePoly(0, Scalar((long)(rng() % 5) - 2)));
            if (f.is_zero()) continue;
            PolySection back = unsymmetrize(normal_order(symmetrize_section(f), c), *fx.chart, c);
            CHECK(back == f);
        }
    }
}

TEST_CASE("gutt_compare golden value on heis3") {
    Fixture h("heis3");
    auto sol = solve_r(h.setup(Scalar(1, 2), T85));
    // p1 * p2 = p1 p2 - nu/2 p3 along both routes
    auto c = point_structure_constants(*h.chart);
    PolySection p1 = h.p(1), p2 = h.p(2);
    UEAWord route = symmetrize_section(p1) * symmetrize_section(p2);
    PolySection via_uea = unsymmetrize(normal_order(route, c), *h.chart, c);
    PolySection via_star = star_product(p1, p2, *sol);
    PolySection expected = p1 * p2 - (Scalar(1, 2) * h.p(3)).nu_shift(1);
    CHECK(via_uea == expected);
    CHECK(via_star == expected);
}

TEST_CASE("gutt_compare across fixtures at bounded degree") {
    for (const auto& name : {"heis3", "so3"}) {
        Fixture fx(name);
        auto sol = solve_r(fx.setup(Scalar(1, 2), T85));
        CheckReport rep = gutt_compare(*sol, 2);
        INFO(name << "\n" << rep.str());
        CHECK(rep.all_pass());
    }
}
