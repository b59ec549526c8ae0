#pragma once

// Densities and divergences on a chart, the modular one-form tr ad and its
// vertical lift, differential-operator extraction by jet interpolation,
// exact formal adjoints for exponential-polynomial densities, and the trace
// certificate for unimodular fixtures.

#include "estar/fedosov.hpp"

#include <atomic>
#include <random>
#include <thread>

namespace estar {

/// Weight exponents of the densities e^{wM}|d^n x| on the base and
/// e^{wE}|e_1 ^ ... ^ e_N| on the bundle (the paper-level E-density symbol
/// collides with the formal parameter and is renamed).
struct DensityWeights {
    BasePoly wM;
    BasePoly wE;
    DensityWeights(int n) : wM(n), wE(n) {}
    DensityWeights(BasePoly m, BasePoly e) : wM(std::move(m)), wE(std::move(e)) {}
};

/// A section of E given by frame components s^alpha (base polynomials).
using FrameSection = std::vector<BasePoly>;

inline FrameSection frame_section(const ValidatedChart& vc, int alpha) {
    FrameSection s(vc.N(), BasePoly(vc.n()));
    s[alpha] = BasePoly(vc.n(), Scalar(1));
    return s;
}

inline BasePoly anchor_apply_section(const FrameSection& s, const BasePoly& u,
                                     const AlgebroidChart& ch) {
    BasePoly r(ch.n);
    for (int a = 0; a < ch.N; ++a) {
        if (s[a].is_zero()) continue;
        r += s[a] * ch.anchor_apply(a, u);
    }
    return r;
}

/// div_mu(s) = (1/mu) L_{rho(s)} mu for mu = e^{wM}|d^n x|.
inline BasePoly div_mu(const FrameSection& s, const DensityWeights& dw, const ValidatedChart& vc) {
    const AlgebroidChart& ch = vc.chart();
    BasePoly r = anchor_apply_section(s, dw.wM, ch);
    for (int i = 0; i < ch.n; ++i) {
        BasePoly comp(ch.n);
        for (int a = 0; a < ch.N; ++a) comp += s[a] * ch.rho(a, i);
        r += comp.diff(i + 1);
    }
    return r;
}

/// div_E(s) = (1/rho_E) L^E_s rho_E for the E-density e^{wE}|e_1 ^...^ e_N|.
inline BasePoly div_E(const FrameSection& s, const DensityWeights& dw, const ValidatedChart& vc) {
    const AlgebroidChart& ch = vc.chart();
    BasePoly r = anchor_apply_section(s, dw.wE, ch);
    for (int a = 0; a < ch.N; ++a) {
        for (int b = 0; b < ch.N; ++b) r += s[b] * ch.c(b, a, a);
        r -= ch.anchor_apply(a, s[a]);
    }
    return r;
}

/// tr ad as a classical E-one-form: tr ad(s) = div_mu(s) + div_E(s).
inline EFormSeries tr_ad(const DensityWeights& dw, const ValidatedChart& vc) {
    EFormSeries out(vc.n());
    for (int a = 0; a < vc.N(); ++a) {
        BasePoly v = div_mu(frame_section(vc, a), dw, vc) + div_E(frame_section(vc, a), dw, vc);
        out.add(0, {a}, v);
    }
    return out;
}

/// Modular vector field of the fibre-constant density Omega = mu (x) rho_E,
/// computed two ways: from L_{X_f} Omega on the coordinate generators and as
/// the vertical lift of tr ad. Disagreement would be an internal error.
inline PhaseVectorField modular_vector_field(const DensityWeights& dw, const ValidatedChart& vc) {
    const AlgebroidChart& ch = vc.chart();
    const int n = ch.n, N = ch.N;
    BasePoly w = dw.wM + dw.wE;
    auto route_a_component = [&](const PolySection& f) {
        // Delta_Omega(f) = X_f(w) + flat divergence of X_f
        PhaseVectorField X = hamiltonian_field(f, vc);
        PolySection val = X.apply(PolySection::scalar(n, N, w));
        for (int i = 0; i < n; ++i) val += X.dq[i].diff_q(i);
        for (int a = 0; a < N; ++a) val += X.dp[a].diff_p(a);
        return val;
    };
    PhaseVectorField Z = PhaseVectorField::zero(n, N);
    for (int i = 0; i < n; ++i)
        Z.dq[i] = route_a_component(PolySection::scalar(n, N, BasePoly::variable(n, i + 1)));
    for (int a = 0; a < N; ++a)
        Z.dp[a] = route_a_component(PolySection::generator(n, N, a));
    // route (b): (tr ad)^ver
    EFormSeries ta = tr_ad(dw, vc);
    PhaseVectorField V = PhaseVectorField::zero(n, N);
    for (int a = 0; a < N; ++a) V.dp[a] = PolySection::scalar(n, N, ta.eval(0, {a}));
    if (!(Z == V))
        throw internal_error("modular_vector_field: Hamiltonian route and vertical lift of "
                             "tr ad disagree");
    return Z;
}

// ---------------------------------------------------------------------------
// Differential-operator extraction by jet interpolation

struct OpKey {
    Expo dq;              // d/dq multi-index (length n)
    std::vector<int> dp;  // d/dp multi-index (length N)
    friend auto operator<=>(const OpKey&, const OpKey&) = default;
    int order() const {
        int o = 0;
        for (int x : dq) o += x;
        for (int x : dp) o += x;
        return o;
    }
};

/// A differential operator on the dual chart with polynomial coefficients,
/// reconstructed from finitely many values.
struct ExtractedOperator {
    int n = 0, N = 0;
    std::map<OpKey, PolySection> coeff;

    PolySection apply(const PolySection& g) const {
        PolySection out(n, N);
        for (const auto& [key, c] : coeff) {
            PolySection d = g;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < key.dq[i]; ++j) d = d.diff_q(i);
            for (int a = 0; a < N; ++a)
                for (int j = 0; j < key.dp[a]; ++j) d = d.diff_p(a);
            out += c * d;
        }
        return out;
    }
    friend bool operator==(const ExtractedOperator& a, const ExtractedOperator& b) {
        return a.coeff == b.coeff;
    }
    std::string str() const {
        if (coeff.empty()) return "0";
        std::string s;
        for (const auto& [key, c] : coeff) {
            if (!s.empty()) s += " + ";
            s += "(" + c.str() + ")";
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < key.dq[i]; ++j) s += "*d/dq" + std::to_string(i + 1);
            for (int a = 0; a < N; ++a)
                for (int j = 0; j < key.dp[a]; ++j) s += "*d/dp" + std::to_string(a + 1);
        }
        return s;
    }
};

enum class OperatorSide { Left, Right, Commutator };

namespace detail {

inline std::vector<OpKey> jet_keys(int n, int N, int order) {
    std::vector<OpKey> keys;
    OpKey k{Expo(n, 0), std::vector<int>(N, 0)};
    std::function<void(int, int)> rec = [&](int pos, int budget) {
        if (pos == n + N) {
            keys.push_back(k);
            return;
        }
        int& slot = pos < n ? k.dq[pos] : k.dp[pos - n];
        for (int v = 0; v <= budget; ++v) {
            slot = v;
            rec(pos + 1, budget - v);
        }
        slot = 0;
    };
    rec(0, order);
    std::sort(keys.begin(), keys.end(), [](const OpKey& a, const OpKey& b) {
        if (a.order() != b.order()) return a.order() < b.order();
        return a < b;
    });
    return keys;
}

inline PolySection jet_monomial(int n, int N, const OpKey& key) {
    PolySection m(n, N);
    Expo e = key.dq;
    m.add(0, key.dp, BasePoly::monomial(n, e, Scalar(1)));
    return m;
}

}  // namespace detail

/// The nu^r coefficient of the one-sided or commutator star multiplication
/// by f, as a function of the other argument.
inline PolySection c_r_value(const PolySection& f, const PolySection& g, int r, OperatorSide side,
                             const FedosovSolution& sol) {
    switch (side) {
        case OperatorSide::Left: return star_product(f, g, sol).nu_part(r);
        case OperatorSide::Right: return star_product(g, f, sol).nu_part(r);
        case OperatorSide::Commutator:
            return (star_product(f, g, sol) - star_product(g, f, sol)).nu_part(r);
    }
    throw internal_error("c_r_value: bad side");
}

/// Reconstruct g |-> C_r(f, g) (or the mirrored/commutator version) as a
/// differential operator of order <= m by triangular jet interpolation, then
/// verify the reconstruction on an independent random probe set.
inline ExtractedOperator extract_operator(const PolySection& f, int r, OperatorSide side,
                                          const FedosovSolution& sol, int order_bound,
                                          unsigned probe_seed = 12345) {
    const int n = sol.setup.n(), N = sol.setup.N();
    ExtractedOperator op;
    op.n = n;
    op.N = N;
    auto keys = detail::jet_keys(n, N, order_bound);
    for (const auto& key : keys) {
        PolySection mono = detail::jet_monomial(n, N, key);
        PolySection val = c_r_value(f, mono, r, side, sol);
        // subtract contributions of lower coefficients already determined
        val = val - op.apply(mono);
        // leading derivative of the monomial is dq! dp!
        Scalar lead(1);
        for (int i = 0; i < n; ++i) lead *= factorial(key.dq[i]);
        for (int a = 0; a < N; ++a) lead *= factorial(key.dp[a]);
        PolySection c = (Scalar(1) / lead) * val;
        if (!c.is_zero()) op.coeff[key] = c;
    }
    // independent probe: random polynomials of higher degree
    std::mt19937 rng(probe_seed);
    for (int trial = 0; trial < 3; ++trial) {
        PolySection probe(n, N);
        for (int t = 0; t < 4; ++t) {
            Expo e(n, 0);
            std::vector<int> b(N, 0);
            int budget = order_bound + 2;
            for (int j = 0; j < budget; ++j) {
                int slot = rng() % (n + N + 1);
                if (slot < n) e[slot] += 1;
                else if (slot < n + N) b[slot - n] += 1;
            }
            int cnum = (int)(rng() % 7) - 3;
            probe.add(0, b, BasePoly::monomial(n, e, Scalar(cnum)));
        }
        if (c_r_value(f, probe, r, side, sol) != op.apply(probe))
            throw input_error("extract_operator: order bound too small at m = " +
                              std::to_string(order_bound));
    }
    return op;
}

/// [L_xi, D] for the fibre Euler field xi = sum p_a d/dp_a, computed on the
/// coefficient form of D.
inline ExtractedOperator euler_commutator(const ExtractedOperator& op) {
    ExtractedOperator out;
    out.n = op.n;
    out.N = op.N;
    for (const auto& [key, c] : op.coeff) {
        PolySection ec(op.n, op.N);
        for (int a = 0; a < op.N; ++a)
            ec += PolySection::generator(op.n, op.N, a) * c.diff_p(a);
        int dp_order = 0;
        for (int x : key.dp) dp_order += x;
        ec = ec - Scalar(dp_order) * c;
        if (!ec.is_zero()) out.coeff[key] = ec;
    }
    return out;
}

/// Formal adjoint applied to 1 for the density e^{wM+wE}|dq dp|:
/// D*(1) = sum (-1)^{|a|} e^{-w} d^a (e^{w} coeff_a), exact because the
/// weight is a base polynomial.
inline PolySection formal_adjoint_unit(const ExtractedOperator& op, const DensityWeights& dw) {
    const int n = op.n, N = op.N;
    BasePoly w = dw.wM + dw.wE;
    PolySection out(n, N);
    for (const auto& [key, c] : op.coeff) {
        PolySection val = c;
        for (int a = 0; a < N; ++a)
            for (int j = 0; j < key.dp[a]; ++j) val = val.diff_p(a);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < key.dq[i]; ++j) {
                // e^{-w} d/dq_i (e^{w} x) = dx/dq_i + (dw/dq_i) x
                val = val.diff_q(i) + PolySection::scalar(n, N, w.diff(i + 1)) * val;
            }
        out += (key.order() % 2 == 0) ? val : -val;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trace certificate

struct TraceCertificate {
    bool refused = false;
    std::string refusal_reason;
    CheckReport report;
    bool pass() const { return !refused && report.all_pass(); }
    std::string str() const {
        if (refused) return "REFUSED : " + refusal_reason + "\n";
        return report.str();
    }
};

namespace detail {

inline std::vector<std::vector<int>> fibre_monomials(int N, int dmax) {
    std::vector<std::vector<int>> out;
    std::vector<int> b(N, 0);
    std::function<void(int, int)> rec = [&](int pos, int budget) {
        if (pos == N) {
            out.push_back(b);
            return;
        }
        for (int v = 0; v <= budget; ++v) {
            b[pos] = v;
            rec(pos + 1, budget - v);
        }
        b[pos] = 0;
    };
    rec(0, dmax);
    return out;
}

template <class Task>
inline void run_tasks(std::vector<Task>& tasks, int threads) {
    if (threads <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            tasks[i]();
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Certify that integration against the fibre-constant density is a trace for
/// the star product: every commutator coefficient operator C_r(f, .) must
/// have vanishing formal adjoint unit, and the left operators must satisfy
/// the Euler homogeneity identity [L_xi, C_r(f,.)] = (k - r) C_r(f,.).
/// Refused (citing the witness) when tr ad != 0 for the given weights.
inline TraceCertificate trace_certificate(const FedosovSolution& sol, const DensityWeights& dw,
                                          int max_fibre_degree, int max_order, int threads = 1) {
    TraceCertificate cert;
    EFormSeries ta = tr_ad(dw, *sol.setup.chart);
    if (!ta.is_zero()) {
        cert.refused = true;
        cert.refusal_reason = "tr ad != 0 for these weights: " + ta.str();
        return cert;
    }
    const int n = sol.setup.n(), N = sol.setup.N();
    auto monos = detail::fibre_monomials(N, max_fibre_degree);
    struct Item {
        std::vector<int> b;
        int r;
        CheckLine adjoint_line;
        CheckLine euler_line;
    };
    std::vector<Item> items;
    for (const auto& b : monos) {
        int k = 0;
        for (int x : b) k += x;
        if (k == 0) continue;
        for (int r = 1; r <= max_order; ++r) items.push_back({b, r, {}, {}});
    }
    // warm the Taylor cache serially so workers only read shared state
    for (const auto& key : detail::jet_keys(n, N, max_order)) {
        PolySection m = detail::jet_monomial(n, N, key);
        taylor(m, sol);
    }
    std::vector<std::function<void()>> tasks;
    tasks.reserve(items.size());
    for (auto& item : items)
        tasks.push_back([&item, &sol, &dw, n, N]() {
            PolySection f(n, N);
            f.add(0, item.b, BasePoly(n, Scalar(1)));
            int k = 0;
            for (int x : item.b) k += x;
            std::string tag = "f=" + f.str() + " r=" + std::to_string(item.r);
            ExtractedOperator comm =
                extract_operator(f, item.r, OperatorSide::Commutator, sol, item.r);
            PolySection unit = formal_adjoint_unit(comm, dw);
            item.adjoint_line = {tag + " adjoint_unit=" + unit.str(), unit.is_zero(), ""};
            ExtractedOperator left = extract_operator(f, item.r, OperatorSide::Left, sol, item.r);
            ExtractedOperator lhs = euler_commutator(left);
            ExtractedOperator rhs;
            rhs.n = n;
            rhs.N = N;
            for (const auto& [key, c] : left.coeff) {
                PolySection scaled = Scalar(k - item.r) * c;
                if (!scaled.is_zero()) rhs.coeff[key] = scaled;
            }
            item.euler_line = {tag + " euler_homogeneity", lhs == rhs,
                               lhs == rhs ? "" : "[L_xi, C_r] != (k-r) C_r"};
        });
    detail::run_tasks(tasks, threads);
    for (const auto& item : items) {
        cert.report.lines.push_back(item.adjoint_line);
        cert.report.lines.push_back(item.euler_line);
    }
    return cert;
}

}  // namespace estar
