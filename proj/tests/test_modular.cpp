#include "test_support.hpp"

using namespace estar;
using ts::Fixture;

namespace {

const NuTruncation T85(6, 5);

FrameSection scaled_section(const Fixture& fx, int alpha, const BasePoly& u) {
    FrameSection s(fx.N, BasePoly(fx.n));
    s[alpha] = u;
    return s;
}

FrameSection rand_frame_section(std::mt19937& rng, const Fixture& fx) {
    FrameSection s(fx.N, BasePoly(fx.n));
    for (int a = 0; a < fx.N; ++a) {
        Expo e(fx.n, 0);
        if (fx.n > 0)
            for (int j = 0; j < (int)(rng() % 3); ++j) e[rng() % fx.n] += 1;
        s[a] = BasePoly::monomial(fx.n, e, Scalar((long)(rng() % 5) - 2));
    }
    return s;
}

BasePoly rand_weight(std::mt19937& rng, int n) {
    Expo e(n, 0);
    if (n > 0) e[rng() % n] += 1 + (int)(rng() % 2);
    return BasePoly::monomial(n, e, Scalar((long)(rng() % 5) - 2));
}

FrameSection bracket_sections(const FrameSection& s, const FrameSection& t, const Fixture& fx) {
    // [s, t]^g = s^a t^b c^g_{ab} + rho(s) t^g - rho(t) s^g
    const AlgebroidChart& ch = fx.chart->chart();
    FrameSection out(fx.N, BasePoly(fx.n));
    for (int g = 0; g < fx.N; ++g) {
        BasePoly v(fx.n);
        for (int a = 0; a < fx.N; ++a)
            for (int b = 0; b < fx.N; ++b) v += s[a] * t[b] * ch.c(a, b, g);
        v += anchor_apply_section(s, t[g], ch) - anchor_apply_section(t, s[g], ch);
        out[g] = v;
    }
    return out;
}

}  // namespace

TEST_CASE("divergence examples") {
    Fixture ab("abelian2");
    DensityWeights flat(0);
    CHECK(div_mu(frame_section(*ab.chart, 0), flat, *ab.chart).is_zero());
    CHECK(div_E(frame_section(*ab.chart, 0), flat, *ab.chart).is_zero());

    // tangent R^1 with wM = q1: div_mu(e1) = 1
    Fixture tr1("tangent_r1");
    DensityWeights dw(BasePoly::variable(1, 1), BasePoly(1));
    CHECK(div_mu(frame_section(*tr1.chart, 0), dw, *tr1.chart) == BasePoly(1, Scalar(1)));

    // ax+b: div_E picks up the structure-constant trace
    Fixture axb("axb");
    DensityWeights flat0(0);
    CHECK(div_E(frame_section(*axb.chart, 0), flat0, *axb.chart) == BasePoly(0, Scalar(1)));
    CHECK(div_E(frame_section(*axb.chart, 1), flat0, *axb.chart).is_zero());
}

TEST_CASE("divergence property equations") {
    std::mt19937 rng(101);
    for (const auto& name : {"heis3", "axb", "tangent_r2", "rank2_anchor"}) {
        Fixture fx(name);
        const AlgebroidChart& ch = fx.chart->chart();
        for (int i = 0; i < 10; ++i) {
            DensityWeights dw(rand_weight(rng, fx.n), rand_weight(rng, fx.n));
            FrameSection s = rand_frame_section(rng, fx);
            FrameSection t = rand_frame_section(rng, fx);
            BasePoly u = rand_weight(rng, fx.n);
            // (I) div(us) = u div(s) +/- rho(s)u
            FrameSection us(fx.N, BasePoly(fx.n));
            for (int a = 0; a < fx.N; ++a) us[a] = u * s[a];
            CHECK(div_mu(us, dw, *fx.chart) ==
                  u * div_mu(s, dw, *fx.chart) + anchor_apply_section(s, u, ch));
            CHECK(div_E(us, dw, *fx.chart) ==
                  u * div_E(s, dw, *fx.chart) - anchor_apply_section(s, u, ch));
            // (II) weight shift by e^v changes the divergence by rho(s)v
            BasePoly v = rand_weight(rng, fx.n);
            DensityWeights dwv(dw.wM + v, dw.wE);
            CHECK(div_mu(s, dwv, *fx.chart) ==
                  div_mu(s, dw, *fx.chart) + anchor_apply_section(s, v, ch));
            DensityWeights dwe(dw.wM, dw.wE + v);
            CHECK(div_E(s, dwe, *fx.chart) ==
                  div_E(s, dw, *fx.chart) + anchor_apply_section(s, v, ch));
            // (III) divergence of a bracket
            FrameSection br = bracket_sections(s, t, fx);
            CHECK(div_mu(br, dw, *fx.chart) ==
                  anchor_apply_section(s, div_mu(t, dw, *fx.chart), ch) -
                      anchor_apply_section(t, div_mu(s, dw, *fx.chart), ch));
            CHECK(div_E(br, dw, *fx.chart) ==
                  anchor_apply_section(s, div_E(t, dw, *fx.chart), ch) -
                      anchor_apply_section(t, div_E(s, dw, *fx.chart), ch));
        }
    }
}

TEST_CASE("tr_ad examples and properties") {
    DensityWeights flat0(0);
    Fixture ab("abelian2");
    CHECK(tr_ad(flat0, *ab.chart).is_zero());
    Fixture h("heis3");
    CHECK(tr_ad(flat0, *h.chart).is_zero());
    Fixture s3("so3");
    CHECK(tr_ad(flat0, *s3.chart).is_zero());

    Fixture axb("axb");
    EFormSeries ta = tr_ad(flat0, *axb.chart);
    EFormSeries expected(0);
    expected.add(0, {0}, BasePoly(0, Scalar(1)));
    CHECK(ta == expected);  // nonzero class: at a point every d_E u = 0

    std::mt19937 rng(102);
    for (const auto& name : {"axb", "rank2_anchor", "tangent_r2"}) {
        Fixture fx(name);
        const AlgebroidChart& ch = fx.chart->chart();
        for (int i = 0; i < 8; ++i) {
            DensityWeights dw(rand_weight(rng, fx.n), rand_weight(rng, fx.n));
            EFormSeries ta2 = tr_ad(dw, *fx.chart);
            // d_E-closed
            CHECK(d_E(ta2, *fx.chart).is_zero());
            // C(M)-linearity: tr_ad(us) = u tr_ad(s) as the divergence anomaly cancels
            FrameSection s = rand_frame_section(rng, fx);
            BasePoly u = rand_weight(rng, fx.n);
            FrameSection us(fx.N, BasePoly(fx.n));
            for (int a = 0; a < fx.N; ++a) us[a] = u * s[a];
            BasePoly lin = div_mu(us, dw, *fx.chart) + div_E(us, dw, *fx.chart) -
                           u * (div_mu(s, dw, *fx.chart) + div_E(s, dw, *fx.chart));
            CHECK(lin.is_zero());
            // density change shifts tr_ad by the exact form d_E(v + w)
            BasePoly v = rand_weight(rng, fx.n), w = rand_weight(rng, fx.n);
            DensityWeights moved(dw.wM + v, dw.wE + w);
            EFormSeries shift = tr_ad(moved, *fx.chart) - ta2;
            EFormSeries exact(fx.n);
            exact.add(0, {}, v + w);
            CHECK(shift == d_E(exact, *fx.chart));
        }
    }
}

TEST_CASE("modular vector field two-route agreement and examples") {
    DensityWeights flat0(0);
    Fixture ab("abelian2");
    PhaseVectorField Z = modular_vector_field(flat0, *ab.chart);
    CHECK(Z == PhaseVectorField::zero(0, 2));

    Fixture h("heis3");
    CHECK(modular_vector_field(flat0, *h.chart) == PhaseVectorField::zero(0, 3));

    Fixture axb("axb");
    PhaseVectorField Zx = modular_vector_field(flat0, *axb.chart);
    CHECK(Zx.dp[0] == PolySection::one(0, 2));
    CHECK(Zx.dp[1].is_zero());

    // the two-route consistency also holds with nontrivial weights on a base
    std::mt19937 rng(103);
    for (const auto& name : {"tangent_r2", "rank2_anchor"}) {
        Fixture fx(name);
        for (int i = 0; i < 6; ++i) {
            DensityWeights dw(rand_weight(rng, fx.n), rand_weight(rng, fx.n));
            CHECK_NOTHROW(modular_vector_field(dw, *fx.chart));
        }
    }
}

TEST_CASE("extract_operator examples") {
    // r = 0: multiplication by f
    Fixture h("heis3");
    auto sol = solve_r(h.setup(Scalar(1, 2), T85));
    PolySection f = h.p(1) * h.p(1);
    ExtractedOperator mult = extract_operator(f, 0, OperatorSide::Left, *sol, 2);
    REQUIRE(mult.coeff.size() == 1);
    CHECK(mult.coeff.begin()->first.order() == 0);
    CHECK(mult.coeff.begin()->second == f);

    // tangent R^1, kappa = 0, f = p, r = 1, left: operator is -d/dq1
    Fixture tr1("tangent_r1");
    auto sol0 = solve_r(tr1.setup(Scalar(0), NuTruncation(5, 4)));
    ExtractedOperator op = extract_operator(tr1.p(1), 1, OperatorSide::Left, *sol0, 1);
    ExtractedOperator expected;
    expected.n = 1;
    expected.N = 1;
    expected.coeff[OpKey{{1}, {0}}] = Scalar(-1) * PolySection::one(1, 1);
    CHECK(op == expected);

    // heis3, f = p1, r = 1, commutator: first-order operator equals the
    // Hamiltonian field action
    ExtractedOperator comm = extract_operator(h.p(1), 1, OperatorSide::Commutator, *sol, 1);
    PhaseVectorField X = hamiltonian_field(h.p(1), *h.chart);
    std::mt19937 rng(104);
    for (int i = 0; i < 6; ++i) {
        PolySection g = random_section(rng, 0, 3, 2, 0, 0);
        CHECK(comm.apply(g) == X.apply(g));
    }
}

TEST_CASE("extract_operator detects an insufficient order bound") {
    Fixture h("heis3");
    auto sol = solve_r(h.setup(Scalar(1, 2), T85));
    // C_2(p1^2 p2, .) is a second-order operator; m = 1 must fail the probe
    PolySection f = h.p(1) * h.p(1) * h.p(2);
    CHECK_THROWS_WITH(extract_operator(f, 2, OperatorSide::Left, *sol, 1),
                      Catch::Matchers::ContainsSubstring("order bound too small"));
}

TEST_CASE("extract_operator round-trips on independent probes") {
    std::mt19937 rng(105);
    for (const auto& name : {"heis3", "rank2_anchor"}) {
        Fixture fx(name);
        auto sol = solve_r(fx.setup(Scalar(1, 2), T85));
        for (int r = 1; r <= 2; ++r) {
            PolySection f = random_section(rng, fx.n, fx.N, 2, 0, 1);
            ExtractedOperator op = extract_operator(f, r, OperatorSide::Left, *sol, r);
            for (int i = 0; i < 4; ++i) {
                PolySection g = random_section(rng, fx.n, fx.N, 3, 0, 2);
                CHECK(op.apply(g) == c_r_value(f, g, r, OperatorSide::Left, *sol));
            }
        }
    }
}

TEST_CASE("formal_adjoint_unit examples") {
    // D = d/dq1 with constant weights: adjoint unit 0
    ExtractedOperator ddq;
    ddq.n = 1;
    ddq.N = 1;
    ddq.coeff[OpKey{{1}, {0}}] = PolySection::one(1, 1);
    DensityWeights flat(1);
    CHECK(formal_adjoint_unit(ddq, flat).is_zero());

    // D = q1 d/dq1: adjoint unit -1
    ExtractedOperator qddq;
    qddq.n = 1;
    qddq.N = 1;
    qddq.coeff[OpKey{{1}, {0}}] =
        PolySection::scalar(1, 1, BasePoly::variable(1, 1));
    PolySection minus_one = Scalar(-1) * PolySection::one(1, 1);
    CHECK(formal_adjoint_unit(qddq, flat) == minus_one);

    // D = d/dp1 with weight 0: adjoint unit 0
    ExtractedOperator ddp;
    ddp.n = 1;
    ddp.N = 1;
    ddp.coeff[OpKey{{0}, {1}}] = PolySection::one(1, 1);
    CHECK(formal_adjoint_unit(ddp, flat).is_zero());

    // nontrivial weight: D = d/dq1 against e^{q1} gives D*(1) = -1 ... sign:
    // e^{-w} d(e^w)/dq = dw/dq, with the adjoint sign (-1)^1
    DensityWeights expw(BasePoly::variable(1, 1), BasePoly(1));
    PolySection unit = formal_adjoint_unit(ddq, expw);
    CHECK(unit == minus_one);
}

TEST_CASE("trace certificate passes on unimodular fixtures") {
    DensityWeights flat0(0);
    Fixture ab("abelian2");
    auto sol_ab = solve_r(ab.setup(Scalar(1, 2), T85));
    TraceCertificate c0 = trace_certificate(*sol_ab, flat0, 2, 2);
    CHECK(c0.pass());

    Fixture h("heis3");
    auto sol = solve_r(h.setup(Scalar(1, 2), NuTruncation(5, 4)));
    TraceCertificate cert = trace_certificate(*sol, flat0, 3, 3);
    INFO(cert.str());
    CHECK(cert.pass());
}

TEST_CASE("trace certificate is refused on a non-unimodular fixture") {
    Fixture axb("axb");
    auto sol = solve_r(axb.setup(Scalar(1, 2), T85));
    TraceCertificate cert = trace_certificate(*sol, DensityWeights(0), 2, 2);
    CHECK(cert.refused);
    CHECK_THAT(cert.refusal_reason, Catch::Matchers::ContainsSubstring("tr ad != 0"));
    CHECK_FALSE(cert.pass());
}

TEST_CASE("trace certificate parallel run agrees with serial") {
    Fixture h("heis3");
    auto sol = solve_r(h.setup(Scalar(1, 2), NuTruncation(5, 4)));
    DensityWeights flat0(0);
    TraceCertificate serial = trace_certificate(*sol, flat0, 2, 2, 1);
    TraceCertificate parallel = trace_certificate(*sol, flat0, 2, 2, 4);
    CHECK(serial.str() == parallel.str());
    CHECK(parallel.pass());
}

TEST_CASE("Euler homogeneity of extracted left operators") {
    Fixture s3("so3");
    auto sol = solve_r(s3.setup(Scalar(1, 2), NuTruncation(5, 4)));
    for (int k = 1; k <= 2; ++k) {
        PolySection f = PolySection::one(0, 3);
        for (int j = 0; j < k; ++j) f = f * s3.p(1 + j % 3);
        for (int r = 1; r <= 2; ++r) {
            ExtractedOperator op = extract_operator(f, r, OperatorSide::Left, *sol, r);
            ExtractedOperator lhs = euler_commutator(op);
            ExtractedOperator rhs;
            rhs.n = 0;
            rhs.N = 3;
            for (const auto& [key, c] : op.coeff) {
                PolySection scaled = Scalar(k - r) * c;
                if (!scaled.is_zero()) rhs.coeff[key] = scaled;
            }
            CHECK(lhs == rhs);
        }
    }
}
