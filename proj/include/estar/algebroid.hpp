#pragma once

// Lie algebroid chart data over a polynomial coordinate patch: anchor and
// structure functions, chart validation, the differential d_E, E-connections
// with torsion/curvature bookkeeping, and the classical Poisson geometry of
// the dual bundle (gauged brackets, Hamiltonian vector fields, lifts).
//
// All tensors are stored in the chart frame e_alpha / e^alpha. Indices are
// 0-based internally and 1-based in every piece of text I/O.

#include "estar/ring.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <utility>

namespace estar {

// ---------------------------------------------------------------------------
// Small index helpers

/// Sort an index tuple into strictly increasing order, tracking the
/// permutation sign. Returns 0 sign on a repeated index.
inline int sort_with_sign(std::vector<int>& idx) {
    int sign = 1;
    for (size_t i = 1; i < idx.size(); ++i)
        for (size_t j = i; j > 0 && idx[j] < idx[j - 1]; --j) {
            std::swap(idx[j], idx[j - 1]);
            sign = -sign;
        }
    for (size_t i = 1; i < idx.size(); ++i)
        if (idx[i] == idx[i - 1]) return 0;
    return sign;
}

inline std::string tuple_str(const std::vector<int>& idx) {
    std::string s = "[";
    for (size_t i = 0; i < idx.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(idx[i] + 1);
    }
    return s + "]";
}

// ---------------------------------------------------------------------------
// Chart data

struct AlgebroidChart {
    std::string name;
    int n = 0;  // base dimension
    int N = 0;  // fibre dimension
    // anchor[alpha][i] = rho^i_alpha
    std::vector<std::vector<BasePoly>> anchor;
    // bracket[alpha][beta][gamma] = c^gamma_{alpha beta}
    std::vector<std::vector<std::vector<BasePoly>>> bracket;

    static AlgebroidChart zero(std::string name, int n, int N) {
        AlgebroidChart c;
        c.name = std::move(name);
        c.n = n;
        c.N = N;
        c.anchor.assign(N, std::vector<BasePoly>(n, BasePoly(n)));
        c.bracket.assign(N, std::vector<std::vector<BasePoly>>(
                                N, std::vector<BasePoly>(N, BasePoly(n))));
        return c;
    }

    const BasePoly& rho(int alpha, int i) const { return anchor[alpha][i]; }
    const BasePoly& c(int a, int b, int g) const { return bracket[a][b][g]; }

    /// rho(e_alpha) applied to a base polynomial.
    BasePoly anchor_apply(int alpha, const BasePoly& u) const {
        BasePoly r(n);
        for (int i = 0; i < n; ++i) r += anchor[alpha][i] * u.diff(i + 1);
        return r;
    }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
    std::string str() const {
        if (ok()) return "valid";
        std::string s;
        for (const auto& v : violations) s += v + "\n";
        return s;
    }
};

inline ValidationReport validate_chart_report(const AlgebroidChart& ch) {
    ValidationReport rep;
    const int N = ch.N, n = ch.n;
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int g = 0; g < N; ++g) {
                BasePoly s = ch.c(a, b, g) + ch.c(b, a, g);
                if (!s.is_zero())
                    rep.violations.push_back("antisymmetry c[" + std::to_string(a + 1) + "][" +
                                             std::to_string(b + 1) + "][" + std::to_string(g + 1) +
                                             "]: residual " + s.str());
            }
    // anchor morphism: rho(e_a)rho^i_b - rho(e_b)rho^i_a = c^g_{ab} rho^i_g
    for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b)
            for (int i = 0; i < n; ++i) {
                BasePoly lhs = ch.anchor_apply(a, ch.rho(b, i)) - ch.anchor_apply(b, ch.rho(a, i));
                for (int g = 0; g < N; ++g) lhs -= ch.c(a, b, g) * ch.rho(g, i);
                if (!lhs.is_zero())
                    rep.violations.push_back("anchor compatibility (" + std::to_string(a + 1) +
                                             "," + std::to_string(b + 1) + "; x" +
                                             std::to_string(i + 1) + "): residual " + lhs.str());
            }
    // Jacobi identity on frame sections
    for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b)
            for (int g = b + 1; g < N; ++g)
                for (int nu = 0; nu < N; ++nu) {
                    BasePoly j(n);
                    const int cyc[3][3] = {{a, b, g}, {b, g, a}, {g, a, b}};
                    for (const auto& t : cyc) {
                        j += ch.anchor_apply(t[0], ch.c(t[1], t[2], nu));
                        for (int m = 0; m < N; ++m) j += ch.c(t[1], t[2], m) * ch.c(t[0], m, nu);
                    }
                    if (!j.is_zero())
                        rep.violations.push_back("Jacobi (" + std::to_string(a + 1) + "," +
                                                 std::to_string(b + 1) + "," + std::to_string(g + 1) +
                                                 "; e" + std::to_string(nu + 1) + "): residual " +
                                                 j.str());
                }
    return rep;
}

/// A chart that has passed validation. Downstream operations take this token;
/// Jacobi failures would otherwise silently break the Fedosov fixed point.
class ValidatedChart {
  public:
    explicit ValidatedChart(AlgebroidChart ch) : ch_(std::move(ch)) {
        ValidationReport rep = validate_chart_report(ch_);
        if (!rep.ok())
            throw input_error("chart '" + ch_.name + "' failed validation:\n" + rep.str());
    }
    const AlgebroidChart& chart() const { return ch_; }
    int n() const { return ch_.n; }
    int N() const { return ch_.N; }
    const std::string& name() const { return ch_.name; }

  private:
    AlgebroidChart ch_;
};

// ---------------------------------------------------------------------------
// E-connection

struct EConnection {
    // gamma[alpha][beta][g] = Gamma^g_{alpha beta}, nabla_{e_alpha} e_beta = Gamma^g_{alpha beta} e_g
    std::vector<std::vector<std::vector<BasePoly>>> gamma;

    static EConnection zero(int n, int N) {
        EConnection g;
        g.gamma.assign(N, std::vector<std::vector<BasePoly>>(
                              N, std::vector<BasePoly>(N, BasePoly(n))));
        return g;
    }
    const BasePoly& G(int a, int b, int g) const { return gamma[a][b][g]; }
    int N() const { return (int)gamma.size(); }
};

inline bool is_torsion_free(const EConnection& G, const AlgebroidChart& ch) {
    for (int a = 0; a < ch.N; ++a)
        for (int b = 0; b < ch.N; ++b)
            for (int g = 0; g < ch.N; ++g)
                if (G.G(a, b, g) - G.G(b, a, g) != ch.c(a, b, g)) return false;
    return true;
}

/// Subtract half the torsion; the result is torsion-free and already
/// torsion-free inputs come back unchanged.
inline EConnection symmetrize_connection(const EConnection& G, const AlgebroidChart& ch) {
    EConnection r = EConnection::zero(ch.n, ch.N);
    Scalar half(1, 2);
    for (int a = 0; a < ch.N; ++a)
        for (int b = 0; b < ch.N; ++b)
            for (int g = 0; g < ch.N; ++g) {
                BasePoly torsion = G.G(a, b, g) - G.G(b, a, g) - ch.c(a, b, g);
                r.gamma[a][b][g] = G.G(a, b, g) - half * torsion;
            }
    return r;
}

/// The canonical torsion-free connection Gamma = c/2.
inline EConnection half_structure_connection(const AlgebroidChart& ch) {
    return symmetrize_connection(EConnection::zero(ch.n, ch.N), ch);
}

// ---------------------------------------------------------------------------
// E-form series (nu-series of E-differential forms; houses B, A, gamma_tr)

struct EFormKey {
    int k = 0;                // nu power
    std::vector<int> idx;     // strictly increasing 0-based frame indices
    friend auto operator<=>(const EFormKey&, const EFormKey&) = default;
};

class EFormSeries {
  public:
    EFormSeries() : n_(0) {}
    explicit EFormSeries(int n) : n_(n) {}

    int arity() const { return n_; }
    bool is_zero() const { return terms_.empty(); }
    const std::map<EFormKey, BasePoly>& terms() const { return terms_; }

    void add(int k, std::vector<int> idx, const BasePoly& u) {
        if (u.is_zero()) return;
        int sign = sort_with_sign(idx);
        if (sign == 0) return;
        EFormKey key{k, std::move(idx)};
        auto it = terms_.find(key);
        BasePoly add_val = sign == 1 ? u : -u;
        if (it == terms_.end()) {
            terms_[std::move(key)] = add_val;
        } else {
            it->second += add_val;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    /// Coefficient on a strictly increasing tuple.
    BasePoly coeff(int k, const std::vector<int>& idx) const {
        auto it = terms_.find(EFormKey{k, idx});
        return it == terms_.end() ? BasePoly(n_) : it->second;
    }

    /// Evaluation with sign normalisation, e.g. omega(e_b, e_a) = -omega(e_a, e_b).
    BasePoly eval(int k, std::vector<int> idx) const {
        int sign = sort_with_sign(idx);
        if (sign == 0) return BasePoly(n_);
        BasePoly u = coeff(k, idx);
        return sign == 1 ? u : -u;
    }

    EFormSeries& operator+=(const EFormSeries& o) {
        for (const auto& [key, u] : o.terms_) add(key.k, key.idx, u);
        return *this;
    }
    friend EFormSeries operator+(EFormSeries a, const EFormSeries& b) { a += b; return a; }
    EFormSeries operator-() const {
        EFormSeries r(n_);
        for (const auto& [key, u] : terms_) r.terms_[key] = -u;
        return r;
    }
    friend EFormSeries operator-(const EFormSeries& a, const EFormSeries& b) { return a + (-b); }
    friend EFormSeries operator*(const Scalar& c, const EFormSeries& f) {
        EFormSeries r(f.n_);
        if (c.is_zero()) return r;
        for (const auto& [key, u] : f.terms_) r.terms_[key] = c * u;
        return r;
    }
    friend bool operator==(const EFormSeries& a, const EFormSeries& b) {
        return a.n_ == b.n_ && a.terms_ == b.terms_;
    }

    /// Multiply by nu^j.
    EFormSeries nu_shift(int j) const {
        EFormSeries r(n_);
        for (const auto& [key, u] : terms_) r.terms_[EFormKey{key.k + j, key.idx}] = u;
        return r;
    }

    /// Keep only the nu^k part (as a classical form).
    EFormSeries nu_part(int k) const {
        EFormSeries r(n_);
        for (const auto& [key, u] : terms_)
            if (key.k == k) r.terms_[EFormKey{0, key.idx}] = u;
        return r;
    }

    bool pure_nu_power(int k) const {
        for (const auto& [key, u] : terms_)
            if (key.k != k) return false;
        return true;
    }
    bool even_in_nu() const {
        for (const auto& [key, u] : terms_)
            if (key.k % 2 != 0) return false;
        return true;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string s;
        for (const auto& [key, u] : terms_) {
            if (!s.empty()) s += " ; ";
            s += "nu^" + std::to_string(key.k) + " e" + tuple_str(key.idx) + " : " + u.str();
        }
        return s;
    }

  private:
    int n_;
    std::map<EFormKey, BasePoly> terms_;
};

inline EFormSeries series_truncate(const EFormSeries& f, const NuTruncation& t) {
    EFormSeries r(f.arity());
    for (const auto& [key, u] : f.terms())
        if (key.k <= t.L) r.add(key.k, key.idx, u);
    return r;
}

/// Lie algebroid differential, degree +1, by the Cartan formula on the frame.
inline EFormSeries d_E(const EFormSeries& omega, const ValidatedChart& vc) {
    const AlgebroidChart& ch = vc.chart();
    EFormSeries out(ch.n);
    for (const auto& [key, u] : omega.terms()) {
        const std::vector<int>& idx = key.idx;
        const int m = (int)idx.size();
        // enumerate strictly increasing (m+1)-tuples tau
        std::vector<int> tau(m + 1);
        std::function<void(int, int)> rec = [&](int pos, int start) {
            if (pos == m + 1) {
                BasePoly val(ch.n);
                for (int i = 0; i <= m; ++i) {
                    std::vector<int> rest;
                    for (int j = 0; j <= m; ++j)
                        if (j != i) rest.push_back(tau[j]);
                    if (rest != idx) continue;
                    BasePoly term = ch.anchor_apply(tau[i], u);
                    val += (i % 2 == 0) ? term : -term;
                }
                for (int i = 0; i <= m; ++i)
                    for (int j = i + 1; j <= m; ++j) {
                        std::vector<int> rest;
                        for (int t = 0; t <= m; ++t)
                            if (t != i && t != j) rest.push_back(tau[t]);
                        for (int g = 0; g < ch.N; ++g) {
                            const BasePoly& cg = ch.c(tau[i], tau[j], g);
                            if (cg.is_zero()) continue;
                            std::vector<int> args;
                            args.push_back(g);
                            args.insert(args.end(), rest.begin(), rest.end());
                            int sign = sort_with_sign(args);
                            if (sign == 0 || args != idx) continue;
                            BasePoly term = cg * u;
                            int total = ((i + j) % 2 == 0 ? 1 : -1) * sign;
                            val += total == 1 ? term : -term;
                        }
                    }
                out.add(key.k, tau, val);
                return;
            }
            for (int v = start; v < ch.N; ++v) {
                tau[pos] = v;
                rec(pos + 1, v + 1);
            }
        };
        rec(0, 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Polynomial sections of Sym E and polynomials on the dual chart

struct PSKey {
    int k = 0;             // nu power
    std::vector<int> b;    // Sym E multidegree, length N
    friend auto operator<=>(const PSKey&, const PSKey&) = default;
};

/// Element of S^bullet(E)[nu]; equivalently a polynomial on E* via the
/// isomorphism sending e_alpha to the fibre coordinate p_alpha.
class PolySection {
  public:
    PolySection() : n_(0), N_(0) {}
    PolySection(int n, int N) : n_(n), N_(N) {}

    static PolySection scalar(int n, int N, const BasePoly& u) {
        PolySection s(n, N);
        s.add(0, std::vector<int>(N, 0), u);
        return s;
    }
    static PolySection generator(int n, int N, int alpha) {  // p_{alpha+1}
        PolySection s(n, N);
        std::vector<int> b(N, 0);
        b[alpha] = 1;
        s.add(0, b, BasePoly(n, Scalar(1)));
        return s;
    }
    static PolySection one(int n, int N) { return scalar(n, N, BasePoly(n, Scalar(1))); }

    int n() const { return n_; }
    int N() const { return N_; }
    bool is_zero() const { return terms_.empty(); }
    const std::map<PSKey, BasePoly>& terms() const { return terms_; }

    void add(int k, const std::vector<int>& b, const BasePoly& u) {
        if (u.is_zero()) return;
        PSKey key{k, b};
        auto it = terms_.find(key);
        if (it == terms_.end()) {
            terms_[std::move(key)] = u;
        } else {
            it->second += u;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    PolySection& operator+=(const PolySection& o) {
        for (const auto& [key, u] : o.terms_) add(key.k, key.b, u);
        return *this;
    }
    PolySection& operator-=(const PolySection& o) {
        for (const auto& [key, u] : o.terms_) add(key.k, key.b, -u);
        return *this;
    }
    friend PolySection operator+(PolySection a, const PolySection& b) { a += b; return a; }
    PolySection operator-() const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_) r.terms_[key] = -u;
        return r;
    }
    friend PolySection operator-(const PolySection& a, const PolySection& b) { return a + (-b); }
    friend PolySection operator*(const Scalar& c, const PolySection& s) {
        PolySection r(s.n_, s.N_);
        if (c.is_zero()) return r;
        for (const auto& [key, u] : s.terms_) r.terms_[key] = c * u;
        return r;
    }
    friend PolySection operator*(const PolySection& a, const PolySection& b) {
        PolySection r(a.n_, a.N_);
        for (const auto& [ka, ua] : a.terms_)
            for (const auto& [kb, ub] : b.terms_) {
                std::vector<int> c(a.N_);
                for (int i = 0; i < a.N_; ++i) c[i] = ka.b[i] + kb.b[i];
                r.add(ka.k + kb.k, c, ua * ub);
            }
        return r;
    }
    friend bool operator==(const PolySection& a, const PolySection& b) {
        return a.n_ == b.n_ && a.N_ == b.N_ && a.terms_ == b.terms_;
    }
    friend bool operator!=(const PolySection& a, const PolySection& b) { return !(a == b); }
    friend bool operator<(const PolySection& a, const PolySection& b) {
        if (a.terms_.size() != b.terms_.size()) return a.terms_.size() < b.terms_.size();
        auto ia = a.terms_.begin(), ib = b.terms_.begin();
        for (; ia != a.terms_.end(); ++ia, ++ib) {
            if (ia->first != ib->first) return ia->first < ib->first;
            if (ia->second != ib->second) return ia->second < ib->second;
        }
        return false;
    }

    /// d/dp_{alpha+1}
    PolySection diff_p(int alpha) const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_) {
            if (key.b[alpha] == 0) continue;
            std::vector<int> b = key.b;
            b[alpha] -= 1;
            r.add(key.k, b, Scalar(key.b[alpha]) * u);
        }
        return r;
    }
    /// d/dq^{i+1}
    PolySection diff_q(int i) const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_) r.add(key.k, key.b, u.diff(i + 1));
        return r;
    }

    PolySection nu_shift(int j) const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_) r.terms_[PSKey{key.k + j, key.b}] = u;
        return r;
    }
    /// nu^k coefficient, as a classical section.
    PolySection nu_part(int k) const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_)
            if (key.k == k) r.terms_[PSKey{0, key.b}] = u;
        return r;
    }
    int max_nu() const {
        int m = 0;
        for (const auto& [key, u] : terms_) m = std::max(m, key.k);
        return m;
    }
    int fibre_degree() const {
        int d = 0;
        for (const auto& [key, u] : terms_) {
            int s = 0;
            for (int x : key.b) s += x;
            d = std::max(d, s);
        }
        return d;
    }
    /// nu |-> -nu
    PolySection nu_parity() const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_)
            r.terms_[key] = (key.k % 2 == 0) ? u : -u;
        return r;
    }
    /// Homogeneity operator H = (fibre Euler degree) + nu d/dnu.
    PolySection homogeneity() const {
        PolySection r(n_, N_);
        for (const auto& [key, u] : terms_) {
            int h = key.k;
            for (int x : key.b) h += x;
            if (h != 0) r.terms_[key] = Scalar(h) * u;
        }
        return r;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [key, u] : terms_) {
            // pull a scalar in front when the base coefficient is a single term
            bool single = u.terms().size() == 1;
            Scalar c = single ? u.terms().begin()->second : Scalar(1);
            if (first) {
                if (c.is_negative()) { os << "-"; c = -c; }
            } else {
                os << (c.is_negative() ? " - " : " + ");
                if (c.is_negative()) c = -c;
            }
            first = false;
            std::vector<std::string> factors;
            if (single) {
                const Expo& e = u.terms().begin()->first;
                bool has_q = false;
                for (int x : e) if (x) has_q = true;
                if (has_q) {
                    BasePoly mono = BasePoly::monomial(n_, e, Scalar(1));
                    factors.push_back(mono.str());
                }
            } else {
                factors.push_back("(" + u.str() + ")");
            }
            if (key.k > 0) factors.push_back(key.k == 1 ? "nu" : "nu^" + std::to_string(key.k));
            for (int a = 0; a < N_; ++a) {
                if (key.b[a] == 0) continue;
                std::string f = "p" + std::to_string(a + 1);
                if (key.b[a] > 1) f += "^" + std::to_string(key.b[a]);
                factors.push_back(f);
            }
            std::string body;
            for (size_t i = 0; i < factors.size(); ++i) {
                if (i) body += "*";
                body += factors[i];
            }
            if (body.empty()) {
                os << c.str();
            } else {
                if (!c.is_one()) os << "(" << c.str() << ")*";
                os << body;
            }
        }
        return os.str();
    }

  private:
    int n_, N_;
    std::map<PSKey, BasePoly> terms_;
};

inline PolySection series_truncate(const PolySection& s, const NuTruncation& t) {
    PolySection r(s.n(), s.N());
    for (const auto& [key, u] : s.terms())
        if (key.k <= t.L) r.add(key.k, key.b, u);
    return r;
}

namespace detail {

struct SectionCtx {
    int n, N;
};

struct SectionRing {
    using Self = SectionRing;
    PolySection p;
    static Self zero(const SectionCtx& c) { return {PolySection(c.n, c.N)}; }
    static Self constant(const SectionCtx& c, const Scalar& v) {
        return {PolySection::scalar(c.n, c.N, BasePoly(c.n, v))};
    }
    static Self var(const SectionCtx& c, const std::string& name) {
        if (name == "nu") return {PolySection::one(c.n, c.N).nu_shift(1)};
        if (name.size() >= 2 && name[0] == 'q') {
            int i = std::stoi(name.substr(1));
            return {PolySection::scalar(c.n, c.N, BasePoly::variable(c.n, i))};
        }
        if (name.size() >= 2 && name[0] == 'p') {
            int a = std::stoi(name.substr(1));
            if (a < 1 || a > c.N) throw input_error("unknown fibre variable '" + name + "'");
            return {PolySection::generator(c.n, c.N, a - 1)};
        }
        throw input_error("unknown variable '" + name + "'");
    }
    Self operator-() const { return {-p}; }
    friend Self operator+(const Self& a, const Self& b) { return {a.p + b.p}; }
    friend Self operator*(const Self& a, const Self& b) { return {a.p * b.p}; }
};

}  // namespace detail

/// Parse a fibre polynomial in q1..qn, p1..pN and nu.
inline PolySection parse_section(const std::string& text, int n, int N) {
    detail::PolyLexer lex(text);
    detail::SectionCtx ctx{n, N};
    detail::SectionRing r = detail::parse_poly_expr<detail::SectionRing>(lex, ctx);
    if (lex.peek().kind != detail::PolyToken::End)
        throw input_error("polynomial syntax: trailing input at offset " +
                          std::to_string(lex.peek().pos));
    return r.p;
}

// ---------------------------------------------------------------------------
// Covariant derivative of sections, gauged bracket, Hamiltonian field

/// nabla_{e_alpha} on S^bullet(E)[nu] sections (Leibniz through the frame).
inline PolySection nabla_section(int alpha, const PolySection& s, const ValidatedChart& vc,
                                 const EConnection& G) {
    const AlgebroidChart& ch = vc.chart();
    PolySection r(ch.n, ch.N);
    for (const auto& [key, u] : s.terms()) {
        r.add(key.k, key.b, ch.anchor_apply(alpha, u));
        for (int beta = 0; beta < ch.N; ++beta) {
            if (key.b[beta] == 0) continue;
            for (int g = 0; g < ch.N; ++g) {
                const BasePoly& Gg = G.G(alpha, beta, g);
                if (Gg.is_zero()) continue;
                std::vector<int> b = key.b;
                b[beta] -= 1;
                b[g] += 1;
                r.add(key.k, b, Scalar(key.b[beta]) * (u * Gg));
            }
        }
    }
    return r;
}

/// Gauged Poisson bracket on polynomial sections; B0 must be the d_E-closed
/// classical part of an E-two-form. The signs follow the convention in which
/// {J(s), J(t)} = -J([s,t]_E).
inline PolySection gauged_poisson_bracket(const PolySection& f, const PolySection& g,
                                          const ValidatedChart& vc, const EConnection& G,
                                          const EFormSeries& B0) {
    const AlgebroidChart& ch = vc.chart();
    if (!is_torsion_free(G, ch))
        throw input_error("gauged_poisson_bracket: connection has torsion");
    if (!B0.pure_nu_power(0))
        throw input_error("gauged_poisson_bracket: B0 must be classical (nu^0)");
    EFormSeries dB = d_E(B0, vc);
    if (!dB.is_zero())
        throw input_error("gauged_poisson_bracket: B0 not closed, d_E B0 = " + dB.str());
    PolySection r(ch.n, ch.N);
    for (int a = 0; a < ch.N; ++a) {
        r += nabla_section(a, f, vc, G) * g.diff_p(a);
        r -= f.diff_p(a) * nabla_section(a, g, vc, G);
    }
    for (int a = 0; a < ch.N; ++a)
        for (int b = 0; b < ch.N; ++b) {
            BasePoly B_ab = B0.eval(0, {a, b});
            if (B_ab.is_zero()) continue;
            r -= PolySection::scalar(ch.n, ch.N, B_ab) * f.diff_p(a) * g.diff_p(b);
        }
    return r;
}

/// Vector field on the dual chart: components over d/dq^i and d/dp_alpha with
/// coefficients polynomial in (q, p).
struct PhaseVectorField {
    int n = 0, N = 0;
    std::vector<PolySection> dq;  // size n
    std::vector<PolySection> dp;  // size N

    static PhaseVectorField zero(int n, int N) {
        PhaseVectorField v;
        v.n = n;
        v.N = N;
        v.dq.assign(n, PolySection(n, N));
        v.dp.assign(N, PolySection(n, N));
        return v;
    }
    PolySection apply(const PolySection& g) const {
        PolySection r(n, N);
        for (int i = 0; i < n; ++i) r += dq[i] * g.diff_q(i);
        for (int a = 0; a < N; ++a) r += dp[a] * g.diff_p(a);
        return r;
    }
    friend bool operator==(const PhaseVectorField& a, const PhaseVectorField& b) {
        return a.dq == b.dq && a.dp == b.dp;
    }
    std::string str() const {
        std::string s;
        for (int i = 0; i < n; ++i)
            if (!dq[i].is_zero()) s += "(" + dq[i].str() + ") d/dq" + std::to_string(i + 1) + " ";
        for (int a = 0; a < N; ++a)
            if (!dp[a].is_zero()) s += "(" + dp[a].str() + ") d/dp" + std::to_string(a + 1) + " ";
        if (s.empty()) return "0";
        s.pop_back();
        return s;
    }
};

/// Hamiltonian vector field of f for the linear Poisson structure (B0 = 0).
inline PhaseVectorField hamiltonian_field(const PolySection& f, const ValidatedChart& vc) {
    const AlgebroidChart& ch = vc.chart();
    PhaseVectorField X = PhaseVectorField::zero(ch.n, ch.N);
    for (int i = 0; i < ch.n; ++i)
        for (int a = 0; a < ch.N; ++a)
            X.dq[i] += PolySection::scalar(ch.n, ch.N, ch.rho(a, i)) * f.diff_p(a);
    for (int a = 0; a < ch.N; ++a) {
        for (int i = 0; i < ch.n; ++i)
            X.dp[a] -= PolySection::scalar(ch.n, ch.N, ch.rho(a, i)) * f.diff_q(i);
    }
    // p_g c^g_{ab} (df/dp_a) d/dp_b
    for (int b = 0; b < ch.N; ++b)
        for (int a = 0; a < ch.N; ++a)
            for (int g = 0; g < ch.N; ++g) {
                const BasePoly& c = ch.c(a, b, g);
                if (c.is_zero()) continue;
                X.dp[b] += PolySection::generator(ch.n, ch.N, g) *
                           PolySection::scalar(ch.n, ch.N, c) * f.diff_p(a);
            }
    return X;
}

/// The Poisson bivector theta_E assembled from horizontal/vertical lifts,
/// stored as antisymmetric components over the phase basis
/// (d/dq^1..d/dq^n, d/dp_1..d/dp_N).
inline std::map<std::pair<int, int>, PolySection> theta_bivector(const ValidatedChart& vc,
                                                                 const EConnection& G) {
    const AlgebroidChart& ch = vc.chart();
    const int n = ch.n, N = ch.N;
    std::map<std::pair<int, int>, PolySection> theta;
    auto add = [&](int i, int j, const PolySection& val) {
        if (val.is_zero()) return;
        PolySection v = val;
        if (i > j) { std::swap(i, j); v = -v; }
        if (i == j) return;
        auto it = theta.find({i, j});
        if (it == theta.end()) theta[{i, j}] = v;
        else {
            it->second += v;
            if (it->second.is_zero()) theta.erase(it);
        }
    };
    // (e_a)^hor wedge (e^a)^ver, with (e^a)^ver = d/dp_a
    for (int a = 0; a < N; ++a) {
        for (int i = 0; i < n; ++i)
            add(i, n + a, PolySection::scalar(n, N, ch.rho(a, i)));
        for (int b = 0; b < N; ++b)
            for (int g = 0; g < N; ++g) {
                const BasePoly& Gg = G.G(a, b, g);
                if (Gg.is_zero()) continue;
                add(n + b, n + a, PolySection::generator(n, N, g) * PolySection::scalar(n, N, Gg));
            }
    }
    return theta;
}

}  // namespace estar
