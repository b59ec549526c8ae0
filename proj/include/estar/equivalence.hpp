#pragma once

// Equivalence transformations between the star products: gauge change for
// cohomologous two-form series (I_A), connection change (E_{nabla-nabla'}),
// and ordering change (N_{gamma, kappa'-kappa}), together with the
// derivations obtained from d_E-closed one-forms.

#include "estar/fedosov.hpp"

namespace estar {

// ---------------------------------------------------------------------------
// Fibrewise automorphisms exp(-(i/lambda) ad_kappa(h))

/// exp(-(i/lambda) ad_kappa(h)) x. The generator is applied as the exact
/// nu-shifted commutator; every application either raises the total degree or
/// lowers the Sym E degree, so the series terminates under truncation.
inline WSLElement fib_automorphism(const WSLElement& h, const WSLElement& x, const Scalar& kappa) {
    WSLElement acc = x;
    WSLElement term = x;
    int guard = x.trunc().T + x.trunc().L + x.max_deg_sstar() + 4;
    for (int m = 1; m <= guard; ++m) {
        term = Scalar(-1, m) * ad_shift(h, term, kappa);
        if (term.is_zero()) return acc;
        acc += term;
    }
    throw internal_error("fib_automorphism: series did not terminate");
}

// ---------------------------------------------------------------------------
// Gauge change I_A for cohomologous B and B'

struct GaugeData {
    EFormSeries A;     // one-form series with d_E A = B - B'
    WSLElement h;      // solves D_kappa h = r' - r - A, sigma(h) = 0
    EFormSeries A0;    // classical part of A
};

/// Build the gauge data for a pair of solutions on the same chart,
/// connection and kappa whose two-form series differ by d_E A.
inline GaugeData make_gauge_data(const EFormSeries& A, const FedosovSolution& sol,
                                 const FedosovSolution& sol_prime) {
    const FedosovSetup& s = sol.setup;
    for (const auto& [key, u] : A.terms())
        if (key.idx.size() != 1) throw input_error("gauge data: A must be a one-form series");
    EFormSeries residual = d_E(A, *s.chart) - (s.B - sol_prime.setup.B);
    if (!residual.is_zero())
        throw input_error("gauge data: d_E A != B - B', residual = " + residual.str());
    GaugeData g;
    g.A = A;
    g.A0 = A.nu_part(0);
    WSLElement Alam = wsl_from_form(A, s.n(), s.N(), s.trunc);
    g.h = homotopy_inverse(sol_prime.r - sol.r - Alam, sol);
    if (!sigma(g.h).is_zero()) throw internal_error("gauge data: sigma(h) != 0");
    return g;
}

/// Closed form of the gauge element: ((exp(D_s) - id)/D_s) A with A placed in
/// the Sym E* slot.
inline WSLElement gauge_h_closed_form(const EFormSeries& A, const FedosovSolution& sol) {
    const FedosovSetup& s = sol.setup;
    WSLElement term = wsl_oneform_in_W(A, s.n(), s.N(), s.trunc);
    WSLElement acc = Scalar(1, 1) * term;  // 1/(0+1)! term
    for (int m = 1; m <= s.trunc.T + 1; ++m) {
        term = sym_cov_D(term, *s.chart, s.conn);
        if (term.is_zero()) return acc;
        acc += (Scalar(1) / factorial(m + 1)) * term;
    }
    return acc;
}

/// The isomorphism I_A from *_{kappa,B} to *_{kappa,B'}.
inline PolySection gauge_iso(const PolySection& f, const GaugeData& g, const FedosovSolution& sol) {
    return sigma(fib_automorphism(g.h, taylor(f, sol), sol.setup.kappa));
}

/// Fibre translation p_alpha |-> p_alpha + A0(e_alpha), exact on polynomials.
inline PolySection fibre_translate(const PolySection& f, const EFormSeries& A0) {
    const int n = f.n(), N = f.N();
    std::vector<BasePoly> shift(N, BasePoly(n));
    for (const auto& [key, u] : A0.terms()) {
        if (key.k != 0 || key.idx.size() != 1)
            throw input_error("fibre_translate: A0 must be a classical one-form");
        shift[key.idx[0]] = u;
    }
    PolySection out(n, N);
    for (const auto& [key, u] : f.terms()) {
        PolySection term = PolySection::scalar(n, N, u).nu_shift(key.k);
        for (int alpha = 0; alpha < N; ++alpha) {
            PolySection factor = PolySection::generator(n, N, alpha) +
                                 PolySection::scalar(n, N, shift[alpha]);
            for (int j = 0; j < key.b[alpha]; ++j) term = term * factor;
        }
        out += term;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Derivations from closed one-forms

/// The derivation of *_kappa attached to a d_E-closed one-form series A:
/// f |-> F(((exp(kappa nu D_s) - exp(-(1-kappa) nu D_s)) / (nu D_s)) A) f.
inline PolySection derivation_from_closed_A(const EFormSeries& A, const PolySection& f,
                                            const FedosovSolution& sol) {
    const FedosovSetup& s = sol.setup;
    EFormSeries dA = d_E(A, *s.chart);
    if (!dA.is_zero())
        throw input_error("derivation_from_closed_A: A not closed, d_E A = " + dA.str());
    const Scalar& kap = s.kappa;
    WSLElement term = wsl_oneform_in_W(A, s.n(), s.N(), s.trunc);
    WSLElement acc = sol.zero();
    for (int m = 0; m <= s.trunc.L; ++m) {
        if (m > 0) {
            term = sym_cov_D(term, *s.chart, s.conn);
            if (term.is_zero()) break;
        }
        // coefficient of nu^m D_s^m in (exp(kappa nu D_s)-exp(-(1-kappa) nu D_s))/(nu D_s)
        Scalar c = (pow(kap, m + 1) - pow(kap - Scalar(1), m + 1)) / factorial(m + 1);
        if (c.is_zero()) continue;
        acc += (c * term).nu_shift(m);
    }
    return fibre_derivative(acc, f);
}

// ---------------------------------------------------------------------------
// Connection change E_{nabla - nabla'}

struct ConnectionChange {
    WSLElement S;  // difference tensor in W^2 (x) S^1
    WSLElement T;  // delta S
    WSLElement h;  // gauge element of the fibrewise automorphism
};

inline std::vector<Scalar> bernoulli_numbers(int m) {
    // B_0 .. B_m via the defining recurrence sum_{j<=m} C(m+1,j) B_j = 0
    std::vector<Scalar> B(m + 1, Scalar(0));
    B[0] = Scalar(1);
    for (int k = 1; k <= m; ++k) {
        Scalar acc(0);
        Scalar binom(1);
        for (int j = 0; j < k; ++j) {
            // C(k+1, j)
            if (j > 0) binom *= Scalar(k + 2 - j) / Scalar(j);
            acc += binom * B[j];
        }
        B[k] = -acc / Scalar(k + 1);
    }
    return B;
}

/// The operator x/(exp(x) - id) with x = {h, .}_fib, expanded with exact
/// Bernoulli coefficients; terminates because {h, .} raises the total degree.
inline WSLElement bernoulli_series_apply(const WSLElement& h, const WSLElement& x,
                                         const Scalar& kappa) {
    std::vector<Scalar> B = bernoulli_numbers(x.trunc().T + 2);
    WSLElement acc = x;  // B_0 = 1
    WSLElement term = x;
    for (int k = 1; k <= x.trunc().T + 2; ++k) {
        term = comm_over_nu(h, term, kappa);
        if (term.is_zero()) break;
        if (!B[k].is_zero()) acc += (B[k] / factorial(k)) * term;
    }
    return acc;
}

/// Build the equivalence data between two torsion-free connections on the
/// same chart sharing the two-form series B.
inline ConnectionChange make_connection_change(const FedosovSolution& sol,
                                               const FedosovSolution& sol_prime) {
    const FedosovSetup& s = sol.setup;
    const AlgebroidChart& ch = s.chart->chart();
    ConnectionChange cc{sol.zero(), sol.zero(), sol.zero()};
    // S = (1/2) sum_{ab} S^g_{ab} e^a e^b (x) e_g with S = Gamma - Gamma'
    for (int a = 0; a < ch.N; ++a)
        for (int b = 0; b < ch.N; ++b)
            for (int g = 0; g < ch.N; ++g) {
                BasePoly diff = s.conn.G(a, b, g) - sol_prime.setup.conn.G(a, b, g);
                if (diff.is_zero()) continue;
                WSLKey key;
                key.a.assign(ch.N, 0);
                key.b.assign(ch.N, 0);
                key.a[a] += 1;
                key.a[b] += 1;
                key.b[g] = 1;
                cc.S.add(key, Scalar(1, 2) * diff);
            }
    cc.T = delta(cc.S);
    // fixed point: h = delta^{-1}(D h - {r,h}_fib - Ber({h,.}_fib)(T + r' - r))
    WSLElement rhs_const = cc.T + sol_prime.r - sol.r;
    WSLElement h = sol.zero();
    for (int iter = 0;; ++iter) {
        if (iter > s.trunc.T + 3)
            throw internal_error("connection change: fixed point did not stabilise");
        WSLElement next = delta_inv(cov_D(h, *s.chart, s.conn) -
                                    comm_over_nu(sol.r, h, s.kappa) -
                                    bernoulli_series_apply(h, rhs_const, s.kappa));
        if (next == h) break;
        h = next;
    }
    cc.h = h;
    if (!sigma(cc.h).is_zero()) throw internal_error("connection change: sigma(h) != 0");
    return cc;
}

/// E_{nabla-nabla'} f = sigma(A_h tau_kappa(f)), an equivalence from the
/// product of nabla to the product of nabla'.
inline PolySection connection_equivalence(const PolySection& f, const ConnectionChange& cc,
                                          const FedosovSolution& sol) {
    return sigma(fib_automorphism(cc.h, taylor(f, sol), sol.setup.kappa));
}

// ---------------------------------------------------------------------------
// Ordering change N_{gamma, kappa' - kappa}

struct OrderingChange {
    EFormSeries gamma_tr;  // one-form with d_E gamma_tr = -Delta_fib R
    WSLElement h;
    Scalar kappa_prime;
};

/// Convert a pure-Lambda element back to an E-form series.
inline EFormSeries form_from_wsl(const WSLElement& x) {
    EFormSeries f(x.n());
    for (const auto& [key, u] : x.terms()) {
        if (key.deg_s() != 0 || key.deg_sstar() != 0)
            throw internal_error("form_from_wsl: element has symmetric parts");
        f.add(key.k, key.lam, u);
    }
    return f;
}

/// Default trace one-form: the contracted Christoffel form with the sign
/// fixed at runtime by the identity d_E gamma = -Delta_fib R. Aborts with
/// both residuals when neither sign satisfies it.
inline EFormSeries default_gamma_tr(const FedosovSolution& sol) {
    const FedosovSetup& s = sol.setup;
    const AlgebroidChart& ch = s.chart->chart();
    EFormSeries cand(ch.n);
    for (int a = 0; a < ch.N; ++a) {
        BasePoly tr(ch.n);
        for (int b = 0; b < ch.N; ++b) tr += s.conn.G(a, b, b);
        cand.add(0, {a}, tr);
    }
    WSLElement R = curvature(s.conn, *s.chart, s.trunc);
    EFormSeries target = -form_from_wsl(laplace_fib(R));
    EFormSeries res_plus = d_E(cand, *s.chart) - target;
    if (res_plus.is_zero()) return cand;
    EFormSeries res_minus = d_E(-cand, *s.chart) - target;
    if (res_minus.is_zero()) return -cand;
    throw internal_error("default_gamma_tr: neither sign of the Christoffel trace satisfies "
                         "d_E gamma = -Delta_fib R; residuals +: " + res_plus.str() +
                         " / -: " + res_minus.str());
}

inline OrderingChange make_ordering_change(const FedosovSolution& sol, const Scalar& kappa_prime,
                                           std::optional<EFormSeries> gamma_opt = std::nullopt) {
    const FedosovSetup& s = sol.setup;
    OrderingChange oc;
    oc.kappa_prime = kappa_prime;
    WSLElement R = curvature(s.conn, *s.chart, s.trunc);
    if (gamma_opt) {
        oc.gamma_tr = *gamma_opt;
        EFormSeries res = d_E(oc.gamma_tr, *s.chart) + form_from_wsl(laplace_fib(R));
        if (!res.is_zero())
            throw input_error("ordering change: supplied gamma_tr fails d_E gamma = "
                              "-Delta_fib R, residual = " + res.str());
    } else {
        oc.gamma_tr = default_gamma_tr(sol);
    }
    // h = -D_{kappa'}^{-1}( nu (kappa'-kappa)(gamma + Delta_fib r) )
    auto sol_kp = with_kappa(sol, kappa_prime);
    WSLElement gam = wsl_from_form(oc.gamma_tr, s.n(), s.N(), s.trunc);
    WSLElement target = (kappa_prime - s.kappa) * (gam + laplace_fib(sol.r)).nu_shift(1);
    oc.h = -homotopy_inverse(target, *sol_kp);
    if (!sigma(oc.h).is_zero()) throw internal_error("ordering change: sigma(h) != 0");
    return oc;
}

/// N_{gamma, kappa'-kappa} f = sigma(A'_h M_{kappa'-kappa} tau_kappa(f)),
/// an equivalence from *_kappa to *_{kappa'}.
inline PolySection kappa_equivalence(const PolySection& f, const OrderingChange& oc,
                                     const FedosovSolution& sol) {
    WSLElement lifted = m_transform(taylor(f, sol), oc.kappa_prime - sol.setup.kappa);
    return sigma(fib_automorphism(oc.h, lifted, oc.kappa_prime));
}

}  // namespace estar
