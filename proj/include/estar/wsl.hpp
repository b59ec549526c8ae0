#pragma once

// The graded algebra W (x) S (x) Lambda underlying the Fedosov construction:
// formal sums of (Sym E*) (x) (Sym E) (x) (Lambda E*) tensors with base
// polynomial coefficients and powers of the real formal parameter nu.
//
// Symmetric slots are realised as polynomial algebras in frame symbols, so
// symmetric insertions act as plain partial derivatives and the Euler
// identities for the degree maps hold on the nose. The antisymmetric slot is
// a strictly increasing index tuple with permutation-sign bookkeeping.
//
// Everything is truncated: nu-powers above L and total degrees
// Deg = deg_s + deg_nu above T are dropped on insertion. All gradings are
// additive under the fibrewise products, so truncation commutes with them and
// algebraic identities hold exactly on the truncated data.

#include "estar/algebroid.hpp"

#include <cassert>

namespace estar {

struct WSLKey {
    std::vector<int> a;    // Sym E* multidegree (length N)
    std::vector<int> b;    // Sym E multidegree (length N)
    std::vector<int> lam;  // strictly increasing Lambda E* indices
    int k = 0;             // nu power
    friend auto operator<=>(const WSLKey&, const WSLKey&) = default;

    int deg_s() const {
        int d = 0;
        for (int x : a) d += x;
        return d;
    }
    int deg_sstar() const {
        int d = 0;
        for (int x : b) d += x;
        return d;
    }
    int deg_a() const { return (int)lam.size(); }
    int total_deg() const { return deg_s() + k; }
};

/// Merge two strictly increasing tuples into one, returning the permutation
/// sign, or 0 when they intersect.
inline int merge_wedge(const std::vector<int>& c1, const std::vector<int>& c2,
                       std::vector<int>& out) {
    out.clear();
    out.reserve(c1.size() + c2.size());
    size_t i = 0, j = 0;
    int sign = 1;
    while (i < c1.size() && j < c2.size()) {
        if (c1[i] == c2[j]) return 0;
        if (c1[i] < c2[j]) {
            out.push_back(c1[i++]);
        } else {
            // c2[j] jumps over the remaining c1 entries
            if ((c1.size() - i) % 2 == 1) sign = -sign;
            out.push_back(c2[j++]);
        }
    }
    while (i < c1.size()) out.push_back(c1[i++]);
    while (j < c2.size()) out.push_back(c2[j++]);
    return sign;
}

class WSLElement {
  public:
    WSLElement() : n_(0), N_(0) {}
    WSLElement(int n, int N, NuTruncation t) : n_(n), N_(N), t_(t) {}

    int n() const { return n_; }
    int N() const { return N_; }
    const NuTruncation& trunc() const { return t_; }
    bool is_zero() const { return terms_.empty(); }
    const std::map<WSLKey, BasePoly>& terms() const { return terms_; }

    void add(const WSLKey& key, const BasePoly& u) {
        if (u.is_zero()) return;
        if (key.k > t_.L || key.total_deg() > t_.T) return;
        auto it = terms_.find(key);
        if (it == terms_.end()) {
            terms_[key] = u;
        } else {
            it->second += u;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    WSLElement& operator+=(const WSLElement& o) {
        check_compat(o);
        for (const auto& [key, u] : o.terms_) add(key, u);
        return *this;
    }
    friend WSLElement operator+(WSLElement a, const WSLElement& b) { a += b; return a; }
    WSLElement operator-() const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_) r.terms_[key] = -u;
        return r;
    }
    friend WSLElement operator-(const WSLElement& a, const WSLElement& b) { return a + (-b); }
    friend WSLElement operator*(const Scalar& c, const WSLElement& x) {
        WSLElement r(x.n_, x.N_, x.t_);
        if (c.is_zero()) return r;
        for (const auto& [key, u] : x.terms_) r.terms_[key] = c * u;
        return r;
    }
    friend bool operator==(const WSLElement& a, const WSLElement& b) {
        return a.n_ == b.n_ && a.N_ == b.N_ && a.terms_ == b.terms_;
    }
    friend bool operator!=(const WSLElement& a, const WSLElement& b) { return !(a == b); }

    void check_compat(const WSLElement& o) const {
        if (n_ != o.n_ || N_ != o.N_ || t_ != o.t_)
            throw input_error("WSLElement: dimension or truncation mismatch");
    }

    int max_total_deg() const {
        int d = 0;
        for (const auto& [key, u] : terms_) d = std::max(d, key.total_deg());
        return d;
    }
    int max_deg_sstar() const {
        int d = 0;
        for (const auto& [key, u] : terms_) d = std::max(d, key.deg_sstar());
        return d;
    }
    bool pure_lambda_degree(int m) const {
        for (const auto& [key, u] : terms_)
            if (key.deg_a() != m) return false;
        return true;
    }
    bool has_lambda_part() const {
        for (const auto& [key, u] : terms_)
            if (key.deg_a() != 0) return false;
        return true;
    }

    /// Keep only keys with total degree == d.
    WSLElement total_deg_part(int d) const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_)
            if (key.total_deg() == d) r.terms_[key] = u;
        return r;
    }
    /// Keep only keys with Sym E degree == d.
    WSLElement deg_sstar_part(int d) const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_)
            if (key.deg_sstar() == d) r.terms_[key] = u;
        return r;
    }

    WSLElement truncated(NuTruncation t) const {
        WSLElement r(n_, N_, t);
        for (const auto& [key, u] : terms_) r.add(key, u);
        return r;
    }

    /// Multiply by nu^j (truncation applies).
    WSLElement nu_shift(int j) const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_) {
            WSLKey s = key;
            s.k += j;
            r.add(s, u);
        }
        return r;
    }

    /// Divide by nu; every stored term must carry a positive nu power.
    WSLElement nu_div_exact() const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_) {
            if (key.k == 0)
                throw internal_error("nu_div_exact: element not divisible by nu");
            WSLKey s = key;
            s.k -= 1;
            r.terms_[s] = u;
        }
        return r;
    }

    /// nu |-> -nu
    WSLElement nu_parity() const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_)
            r.terms_[key] = (key.k % 2 == 0) ? u : -u;
        return r;
    }

    /// Homogeneity operator H = deg_sstar + deg_nu.
    WSLElement homogeneity() const {
        WSLElement r(n_, N_, t_);
        for (const auto& [key, u] : terms_) {
            int h = key.deg_sstar() + key.k;
            if (h != 0) r.terms_[key] = Scalar(h) * u;
        }
        return r;
    }

    /// Debug dump, one sorted line per key: `W[a] S[b] L[c] nu^k : polynomial`.
    std::string dump() const {
        if (terms_.empty()) return "0\n";
        std::ostringstream os;
        for (const auto& [key, u] : terms_) {
            os << "W[";
            for (int i = 0; i < N_; ++i) os << (i ? "," : "") << key.a[i];
            os << "] S[";
            for (int i = 0; i < N_; ++i) os << (i ? "," : "") << key.b[i];
            os << "] L[";
            for (size_t i = 0; i < key.lam.size(); ++i)
                os << (i ? "," : "") << key.lam[i] + 1;
            os << "] nu^" << key.k << " : " << u.str() << "\n";
        }
        return os.str();
    }

  private:
    int n_, N_;
    NuTruncation t_;
    std::map<WSLKey, BasePoly> terms_;
};

inline WSLElement series_truncate(const WSLElement& x, const NuTruncation& t) {
    return x.truncated(t);
}

// ---------------------------------------------------------------------------
// Embeddings

inline WSLElement wsl_zero(int n, int N, NuTruncation t) { return WSLElement(n, N, t); }

inline WSLElement wsl_one(int n, int N, NuTruncation t) {
    WSLElement x(n, N, t);
    x.add(WSLKey{std::vector<int>(N, 0), std::vector<int>(N, 0), {}, 0}, BasePoly(n, Scalar(1)));
    return x;
}

/// Pure S-part embedding of a polynomial section.
inline WSLElement wsl_from_section(const PolySection& s, NuTruncation t) {
    WSLElement x(s.n(), s.N(), t);
    for (const auto& [key, u] : s.terms())
        x.add(WSLKey{std::vector<int>(s.N(), 0), key.b, {}, key.k}, u);
    return x;
}

/// Pure Lambda-part embedding of an E-form series.
inline WSLElement wsl_from_form(const EFormSeries& f, int n, int N, NuTruncation t) {
    WSLElement x(n, N, t);
    for (const auto& [key, u] : f.terms())
        x.add(WSLKey{std::vector<int>(N, 0), std::vector<int>(N, 0), key.idx, key.k}, u);
    return x;
}

/// One-form series placed in the Sym E* slot instead of the Lambda slot.
inline WSLElement wsl_oneform_in_W(const EFormSeries& f, int n, int N, NuTruncation t) {
    WSLElement x(n, N, t);
    for (const auto& [key, u] : f.terms()) {
        if (key.idx.size() != 1)
            throw input_error("wsl_oneform_in_W: expected a one-form");
        std::vector<int> a(N, 0);
        a[key.idx[0]] = 1;
        x.add(WSLKey{a, std::vector<int>(N, 0), {}, key.k}, u);
    }
    return x;
}

/// The identity endomorphism as an element of S^1 (x) Lambda^1.
inline WSLElement wsl_identity_endo(int n, int N, NuTruncation t) {
    WSLElement x(n, N, t);
    for (int alpha = 0; alpha < N; ++alpha) {
        std::vector<int> b(N, 0);
        b[alpha] = 1;
        x.add(WSLKey{std::vector<int>(N, 0), b, {alpha}, 0}, BasePoly(n, Scalar(1)));
    }
    return x;
}

/// Projection onto the part of deg_s- and deg_a-degree 0.
inline PolySection sigma(const WSLElement& x) {
    PolySection s(x.n(), x.N());
    for (const auto& [key, u] : x.terms())
        if (key.deg_s() == 0 && key.deg_a() == 0) s.add(key.k, key.b, u);
    return s;
}

// ---------------------------------------------------------------------------
// mu and the kappa-ordered fibrewise products

inline WSLElement mu_product(const WSLElement& x, const WSLElement& y) {
    x.check_compat(y);
    WSLElement r(x.n(), x.N(), x.trunc());
    const int N = x.N();
    std::vector<int> merged;
    for (const auto& [kx, ux] : x.terms())
        for (const auto& [ky, uy] : y.terms()) {
            int k = kx.k + ky.k;
            if (k > x.trunc().L) continue;
            if (kx.total_deg() + ky.total_deg() > x.trunc().T) continue;
            int sign = merge_wedge(kx.lam, ky.lam, merged);
            if (sign == 0) continue;
            WSLKey key;
            key.a.resize(N);
            key.b.resize(N);
            for (int i = 0; i < N; ++i) {
                key.a[i] = kx.a[i] + ky.a[i];
                key.b[i] = kx.b[i] + ky.b[i];
            }
            key.lam = merged;
            key.k = k;
            if (key.total_deg() > x.trunc().T) continue;
            BasePoly prod = ux * uy;
            r.add(key, sign == 1 ? prod : -prod);
        }
    return r;
}

namespace detail {

inline Scalar falling_factorial(int b, int j) {
    Scalar r(1);
    for (int i = 0; i < j; ++i) r *= Scalar(b - i);
    return r;
}

/// Single bidifferential term of the exponential in the kappa-ordered
/// product: contract J pairs (z of x / y of y) and M pairs (y of x / z of y),
/// weighted nu^{|J|+|M|} (kappa-1)^{|J|} kappa^{|M|} / (J! M!).
/// `nu_offset` shifts the nu power (used for the exact commutator-over-nu),
/// `min_contr` skips low orders of the exponential.
inline void fib_accumulate(WSLElement& out, const WSLKey& kx, const BasePoly& ux,
                           const WSLKey& ky, const BasePoly& uy, const Scalar& kappa,
                           int min_contr, int nu_offset, int global_sign) {
    // the total degree is additive under every contraction term, and the nu
    // power only grows, so whole key pairs can be pruned up front
    if (kx.total_deg() + ky.total_deg() + nu_offset > out.trunc().T) return;
    if (kx.k + ky.k + min_contr + nu_offset > out.trunc().L) return;
    const int N = (int)kx.a.size();
    const Scalar km1 = kappa - Scalar(1);
    std::vector<int> J(N, 0), M(N, 0);
    std::vector<int> maxJ(N), maxM(N);
    for (int i = 0; i < N; ++i) {
        maxJ[i] = std::min(kx.b[i], ky.a[i]);
        maxM[i] = std::min(kx.a[i], ky.b[i]);
    }
    std::vector<int> merged;
    std::function<void(int)> recM = [&](int pos) {
        if (pos == N) {
            int nj = 0, nm = 0;
            for (int i = 0; i < N; ++i) { nj += J[i]; nm += M[i]; }
            if (nj + nm < min_contr) return;
            int k = kx.k + ky.k + nj + nm + nu_offset;
            if (k > out.trunc().L || k < 0) return;
            Scalar coeff = pow(km1, nj) * pow(kappa, nm);
            if (coeff.is_zero()) return;
            WSLKey key;
            key.a.resize(N);
            key.b.resize(N);
            for (int i = 0; i < N; ++i) {
                coeff *= falling_factorial(kx.b[i], J[i]) / factorial(J[i]);
                coeff *= falling_factorial(ky.a[i], J[i]);
                coeff *= falling_factorial(kx.a[i], M[i]) / factorial(M[i]);
                coeff *= falling_factorial(ky.b[i], M[i]);
                key.a[i] = kx.a[i] - M[i] + ky.a[i] - J[i];
                key.b[i] = kx.b[i] - J[i] + ky.b[i] - M[i];
            }
            key.k = k;
            int sign = merge_wedge(kx.lam, ky.lam, merged);
            if (sign == 0) return;
            key.lam = merged;
            if (key.total_deg() > out.trunc().T) return;
            BasePoly val = (coeff * (ux * uy));
            out.add(key, (sign * global_sign) == 1 ? val : -val);
            return;
        }
        for (M[pos] = 0; M[pos] <= maxM[pos]; ++M[pos]) recM(pos + 1);
        M[pos] = 0;
    };
    std::function<void(int)> recJ = [&](int pos) {
        if (pos == N) { recM(0); return; }
        for (J[pos] = 0; J[pos] <= maxJ[pos]; ++J[pos]) recJ(pos + 1);
        J[pos] = 0;
    };
    recJ(0);
}

}  // namespace detail

/// kappa-ordered fibrewise product.
inline WSLElement fib_product(const WSLElement& x, const WSLElement& y, const Scalar& kappa) {
    x.check_compat(y);
    WSLElement r(x.n(), x.N(), x.trunc());
    for (const auto& [kx, ux] : x.terms())
        for (const auto& [ky, uy] : y.terms())
            detail::fib_accumulate(r, kx, ux, ky, uy, kappa, 0, 0, 1);
    return r;
}

/// The exact nu-shifted super-commutator (1/nu)[a, x] for the kappa-ordered
/// product. The contraction-free parts of a o x and x o a cancel identically,
/// so the quotient is computed term by term without ever forming the nu^0
/// component; the result is exact at every retained nu order.
inline WSLElement comm_over_nu(const WSLElement& a, const WSLElement& x, const Scalar& kappa) {
    a.check_compat(x);
    WSLElement r(a.n(), a.N(), a.trunc());
    for (const auto& [ka, ua] : a.terms())
        for (const auto& [kx, ux] : x.terms()) {
            int sgn = (ka.deg_a() * kx.deg_a()) % 2 == 0 ? 1 : -1;
            detail::fib_accumulate(r, ka, ua, kx, ux, kappa, 1, -1, 1);
            detail::fib_accumulate(r, kx, ux, ka, ua, kappa, 1, -1, -sgn);
        }
    return r;
}

/// (i/lambda) ad_kappa(a) applied to x; with nu = i lambda this is the exact
/// nu-degree -1 shift of the nu-divisible super-commutator, i.e. -(1/nu)[a,x].
inline WSLElement ad_shift(const WSLElement& a, const WSLElement& x, const Scalar& kappa) {
    return -comm_over_nu(a, x, kappa);
}

// ---------------------------------------------------------------------------
// delta, delta^{-1}, fibrewise Laplacian, equivalence M

inline WSLElement delta(const WSLElement& x) {
    WSLElement r(x.n(), x.N(), x.trunc());
    const int N = x.N();
    for (const auto& [key, u] : x.terms())
        for (int alpha = 0; alpha < N; ++alpha) {
            if (key.a[alpha] == 0) continue;
            WSLKey s = key;
            s.a[alpha] -= 1;
            // left wedge with e^alpha
            int pos = 0;
            bool dup = false;
            for (int v : key.lam) {
                if (v == alpha) { dup = true; break; }
                if (v < alpha) ++pos;
            }
            if (dup) continue;
            s.lam.insert(s.lam.begin() + pos, alpha);
            BasePoly val = Scalar(key.a[alpha]) * u;
            r.add(s, pos % 2 == 0 ? val : -val);
        }
    return r;
}

/// delta^* = (e^alpha (x) 1 (x) 1) i_a(e_alpha)
inline WSLElement delta_star(const WSLElement& x) {
    WSLElement r(x.n(), x.N(), x.trunc());
    for (const auto& [key, u] : x.terms())
        for (size_t t = 0; t < key.lam.size(); ++t) {
            WSLKey s = key;
            int alpha = key.lam[t];
            s.lam.erase(s.lam.begin() + t);
            s.a[alpha] += 1;
            r.add(s, t % 2 == 0 ? u : -u);
        }
    return r;
}

/// Normalised homotopy delta^{-1} = (1/(k+l)) delta^* on the (k,l) bidegree
/// component, zero on k+l = 0.
inline WSLElement delta_inv(const WSLElement& x) {
    WSLElement r(x.n(), x.N(), x.trunc());
    for (const auto& [key, u] : x.terms()) {
        int kl = key.deg_s() + key.deg_a();
        if (kl == 0) continue;
        Scalar c(1, kl);
        for (size_t t = 0; t < key.lam.size(); ++t) {
            WSLKey s = key;
            int alpha = key.lam[t];
            s.lam.erase(s.lam.begin() + t);
            s.a[alpha] += 1;
            BasePoly val = c * u;
            r.add(s, t % 2 == 0 ? val : -val);
        }
    }
    return r;
}

inline WSLElement laplace_fib(const WSLElement& x) {
    WSLElement r(x.n(), x.N(), x.trunc());
    for (const auto& [key, u] : x.terms())
        for (int alpha = 0; alpha < x.N(); ++alpha) {
            if (key.a[alpha] == 0 || key.b[alpha] == 0) continue;
            WSLKey s = key;
            s.a[alpha] -= 1;
            s.b[alpha] -= 1;
            r.add(s, Scalar(key.a[alpha] * key.b[alpha]) * u);
        }
    return r;
}

/// M_{kappa'-kappa} = exp(nu (kappa'-kappa) Delta_fib): fibrewise algebra
/// isomorphism from o_kappa to o_kappa'.
inline WSLElement m_transform(const WSLElement& x, const Scalar& dkappa) {
    WSLElement acc = x;
    WSLElement pow_term = x;
    for (int m = 1;; ++m) {
        pow_term = laplace_fib(pow_term);
        if (pow_term.is_zero()) break;
        if (m > x.trunc().L) break;
        WSLElement t = (pow(dkappa, m) / factorial(m)) * pow_term;
        acc += t.nu_shift(m);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Covariant derivative D and curvature

/// nabla_{e_alpha} acting tensorially on all three slots plus the base
/// coefficient; the frame transforms with the Christoffel symbols of G.
inline WSLElement nabla_wsl(int alpha, const WSLElement& x, const ValidatedChart& vc,
                            const EConnection& G) {
    const AlgebroidChart& ch = vc.chart();
    WSLElement r(x.n(), x.N(), x.trunc());
    for (const auto& [key, u] : x.terms()) {
        r.add(key, ch.anchor_apply(alpha, u));
        // W slot: e^beta |-> -Gamma^beta_{alpha g} e^g
        for (int beta = 0; beta < ch.N; ++beta) {
            if (key.a[beta] == 0) continue;
            for (int g = 0; g < ch.N; ++g) {
                const BasePoly& Gp = G.G(alpha, g, beta);
                if (Gp.is_zero()) continue;
                WSLKey s = key;
                s.a[beta] -= 1;
                s.a[g] += 1;
                r.add(s, Scalar(-key.a[beta]) * (u * Gp));
            }
        }
        // S slot: e_beta |-> Gamma^g_{alpha beta} e_g
        for (int beta = 0; beta < ch.N; ++beta) {
            if (key.b[beta] == 0) continue;
            for (int g = 0; g < ch.N; ++g) {
                const BasePoly& Gp = G.G(alpha, beta, g);
                if (Gp.is_zero()) continue;
                WSLKey s = key;
                s.b[beta] -= 1;
                s.b[g] += 1;
                r.add(s, Scalar(key.b[beta]) * (u * Gp));
            }
        }
        // Lambda slot: e^beta |-> -Gamma^beta_{alpha g} e^g, in place
        for (size_t t = 0; t < key.lam.size(); ++t) {
            int beta = key.lam[t];
            for (int g = 0; g < ch.N; ++g) {
                const BasePoly& Gp = G.G(alpha, g, beta);
                if (Gp.is_zero()) continue;
                std::vector<int> lam = key.lam;
                lam[t] = g;
                int sign = sort_with_sign(lam);
                if (sign == 0) continue;
                WSLKey s = key;
                s.lam = lam;
                BasePoly val = u * Gp;
                r.add(s, sign == 1 ? -val : val);
            }
        }
    }
    return r;
}

/// D = (1 (x) 1 (x) e^alpha) nabla_{e_alpha}; requires a torsion-free
/// connection so that D is a super-derivation with [delta, D] = 0.
inline WSLElement cov_D(const WSLElement& x, const ValidatedChart& vc, const EConnection& G) {
    if (!is_torsion_free(G, vc.chart()))
        throw input_error("cov_D: connection has torsion");
    WSLElement r(x.n(), x.N(), x.trunc());
    for (int alpha = 0; alpha < vc.N(); ++alpha) {
        WSLElement na = nabla_wsl(alpha, x, vc, G);
        for (const auto& [key, u] : na.terms()) {
            int pos = 0;
            bool dup = false;
            for (int v : key.lam) {
                if (v == alpha) { dup = true; break; }
                if (v < alpha) ++pos;
            }
            if (dup) continue;
            WSLKey s = key;
            s.lam.insert(s.lam.begin() + pos, alpha);
            r.add(s, pos % 2 == 0 ? u : -u);
        }
    }
    return r;
}

/// Curvature tensor of G as an element of W^1 (x) S^1 (x) Lambda^2:
/// R = sum_{mu<nu} R^g_{beta mu nu} e^beta (x) e_g (x) e^mu ^ e^nu.
inline WSLElement curvature(const EConnection& G, const ValidatedChart& vc, NuTruncation t) {
    const AlgebroidChart& ch = vc.chart();
    WSLElement R(ch.n, ch.N, t);
    for (int mu = 0; mu < ch.N; ++mu)
        for (int nu = mu + 1; nu < ch.N; ++nu)
            for (int beta = 0; beta < ch.N; ++beta)
                for (int g = 0; g < ch.N; ++g) {
                    BasePoly val = ch.anchor_apply(mu, G.G(nu, beta, g)) -
                                   ch.anchor_apply(nu, G.G(mu, beta, g));
                    for (int d = 0; d < ch.N; ++d) {
                        val += G.G(mu, d, g) * G.G(nu, beta, d);
                        val -= G.G(nu, d, g) * G.G(mu, beta, d);
                        val -= ch.c(mu, nu, d) * G.G(d, beta, g);
                    }
                    if (val.is_zero()) continue;
                    WSLKey key;
                    key.a.assign(ch.N, 0);
                    key.b.assign(ch.N, 0);
                    key.a[beta] = 1;
                    key.b[g] = 1;
                    key.lam = {mu, nu};
                    key.k = 0;
                    R.add(key, val);
                }
    return R;
}

/// Symmetric covariant derivative D_s = e^alpha nabla_{e_alpha} acting on the
/// W slot (raises deg_s by one, leaves S and Lambda alone).
inline WSLElement sym_cov_D(const WSLElement& x, const ValidatedChart& vc, const EConnection& G) {
    WSLElement r(x.n(), x.N(), x.trunc());
    for (int alpha = 0; alpha < vc.N(); ++alpha) {
        WSLElement na = nabla_wsl(alpha, x, vc, G);
        for (const auto& [key, u] : na.terms()) {
            WSLKey s = key;
            s.a[alpha] += 1;
            r.add(s, u);
        }
    }
    return r;
}

}  // namespace estar
