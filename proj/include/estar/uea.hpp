#pragma once

// Brute-force universal-enveloping-algebra oracle for Lie algebra fixtures
// (point base). Words in the frame generators are rewritten to the
// Poincare-Birkhoff-Witt basis of non-decreasing words using
//   e_a <> e_b - e_b <> e_a = -nu c^g_{ab} e_g,
// and the Weyl-ordered star product is compared against the symmetrisation
// transport through this algebra.

#include "estar/fedosov.hpp"

#include <random>

namespace estar {

struct UEAKey {
    std::vector<int> word;  // generator indices, arbitrary order
    int k = 0;              // nu power
    friend auto operator<=>(const UEAKey&, const UEAKey&) = default;
};

/// Formal sum of generator words with rational nu-polynomial coefficients.
class UEAWord {
  public:
    UEAWord() = default;
    explicit UEAWord(int N) : N_(N) {}
    static UEAWord generator(int N, int alpha) {
        UEAWord w(N);
        w.add({{alpha}, 0}, Scalar(1));
        return w;
    }
    static UEAWord one(int N) {
        UEAWord w(N);
        w.add({{}, 0}, Scalar(1));
        return w;
    }

    int N() const { return N_; }
    bool is_zero() const { return terms_.empty(); }
    const std::map<UEAKey, Scalar>& terms() const { return terms_; }

    void add(const UEAKey& key, const Scalar& c) {
        if (c.is_zero()) return;
        auto it = terms_.find(key);
        if (it == terms_.end()) {
            terms_[key] = c;
        } else {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }
    UEAWord& operator+=(const UEAWord& o) {
        for (const auto& [key, c] : o.terms_) add(key, c);
        return *this;
    }
    friend UEAWord operator+(UEAWord a, const UEAWord& b) { a += b; return a; }
    friend UEAWord operator*(const Scalar& c, const UEAWord& w) {
        UEAWord r(w.N_);
        if (c.is_zero()) return r;
        for (const auto& [key, v] : w.terms_) r.terms_[key] = c * v;
        return r;
    }
    /// Concatenation product of the free algebra.
    friend UEAWord operator*(const UEAWord& a, const UEAWord& b) {
        UEAWord r(a.N_);
        for (const auto& [ka, ca] : a.terms_)
            for (const auto& [kb, cb] : b.terms_) {
                UEAKey key;
                key.word = ka.word;
                key.word.insert(key.word.end(), kb.word.begin(), kb.word.end());
                key.k = ka.k + kb.k;
                r.add(key, ca * cb);
            }
        return r;
    }
    friend bool operator==(const UEAWord& a, const UEAWord& b) { return a.terms_ == b.terms_; }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string s;
        for (const auto& [key, c] : terms_) {
            if (!s.empty()) s += " + ";
            s += "(" + c.str() + ")";
            if (key.k > 0) s += "*nu^" + std::to_string(key.k);
            for (int g : key.word) s += "*e" + std::to_string(g + 1);
        }
        return s;
    }

  private:
    int N_ = 0;
    std::map<UEAKey, Scalar> terms_;
};

/// Structure constants of a point-base chart as exact rationals.
inline std::vector<std::vector<std::vector<Scalar>>> point_structure_constants(
    const ValidatedChart& vc) {
    const AlgebroidChart& ch = vc.chart();
    if (ch.n != 0) throw input_error("uea: module supports point-base charts only (n = 0)");
    std::vector<std::vector<std::vector<Scalar>>> c(
        ch.N, std::vector<std::vector<Scalar>>(ch.N, std::vector<Scalar>(ch.N, Scalar(0))));
    for (int a = 0; a < ch.N; ++a)
        for (int b = 0; b < ch.N; ++b)
            for (int g = 0; g < ch.N; ++g) c[a][b][g] = ch.c(a, b, g).constant_term();
    return c;
}

/// Rewrite to the PBW basis of non-decreasing words. `strategy` selects which
/// descent is rewritten first (0 = leftmost, 1 = rightmost, else seeded
/// random); confluence makes the result independent of the choice.
inline UEAWord normal_order(const UEAWord& w,
                            const std::vector<std::vector<std::vector<Scalar>>>& c,
                            int strategy = 0, unsigned seed = 0) {
    const int N = w.N();
    std::mt19937 rng(seed);
    UEAWord pending = w;
    UEAWord done(N);
    int guard = 0;
    while (!pending.is_zero()) {
        if (++guard > 200000) throw internal_error("normal_order: rewriting did not terminate");
        UEAWord next(N);
        for (const auto& [key, coeff] : pending.terms()) {
            std::vector<int> descents;
            for (size_t i = 0; i + 1 < key.word.size(); ++i)
                if (key.word[i] > key.word[i + 1]) descents.push_back((int)i);
            if (descents.empty()) {
                done.add(key, coeff);
                continue;
            }
            int pick;
            if (strategy == 0) pick = descents.front();
            else if (strategy == 1) pick = descents.back();
            else pick = descents[rng() % descents.size()];
            int beta = key.word[pick], alpha = key.word[pick + 1];  // beta > alpha
            UEAKey swapped = key;
            std::swap(swapped.word[pick], swapped.word[pick + 1]);
            next.add(swapped, coeff);
            // e_beta e_alpha = e_alpha e_beta - nu c^g_{beta alpha} e_g
            for (int g = 0; g < N; ++g) {
                if (c[beta][alpha][g].is_zero()) continue;
                UEAKey rk;
                rk.word.assign(key.word.begin(), key.word.begin() + pick);
                rk.word.push_back(g);
                rk.word.insert(rk.word.end(), key.word.begin() + pick + 2, key.word.end());
                rk.k = key.k + 1;
                next.add(rk, -coeff * c[beta][alpha][g]);
            }
        }
        pending = next;
        // move fully ordered terms out as they appear
        UEAWord still(N);
        for (const auto& [key, coeff] : pending.terms()) {
            bool sorted = true;
            for (size_t i = 0; i + 1 < key.word.size(); ++i)
                if (key.word[i] > key.word[i + 1]) sorted = false;
            if (sorted) done.add(key, coeff);
            else still.add(key, coeff);
        }
        pending = still;
    }
    return done;
}

/// Total symmetrisation of a fibre monomial into the free algebra.
inline UEAWord symmetrize_monomial(const std::vector<int>& b, int N) {
    std::vector<int> letters;
    for (int a = 0; a < N; ++a)
        for (int j = 0; j < b[a]; ++j) letters.push_back(a);
    std::sort(letters.begin(), letters.end());
    UEAWord out(N);
    int m = (int)letters.size();
    if (m == 0) return UEAWord::one(N);
    // sum over distinct arrangements, weight (prod b_a!) / m!
    Scalar weight(1);
    for (int a = 0; a < N; ++a) weight *= factorial(b[a]);
    weight /= factorial(m);
    do {
        out.add({letters, 0}, weight);
    } while (std::next_permutation(letters.begin(), letters.end()));
    return out;
}

inline UEAWord symmetrize_section(const PolySection& f) {
    UEAWord out(f.N());
    for (const auto& [key, u] : f.terms()) {
        Scalar c = u.constant_term();
        UEAWord sym = symmetrize_monomial(key.b, f.N());
        for (const auto& [wk, wc] : sym.terms()) {
            UEAKey shifted = wk;
            shifted.k += key.k;
            out.add(shifted, wc * c);
        }
    }
    return out;
}

/// Inverse of the symmetrisation transport on PBW normal forms: peel the
/// longest words, subtract their symmetrised normal forms, repeat. The map is
/// triangular in the word-length filtration, so this terminates.
inline PolySection unsymmetrize(const UEAWord& pbw, const ValidatedChart& vc,
                                const std::vector<std::vector<std::vector<Scalar>>>& c) {
    const int N = vc.N();
    PolySection out(0, N);
    UEAWord rest = pbw;
    int guard = 0;
    while (!rest.is_zero()) {
        if (++guard > 10000) throw internal_error("unsymmetrize: did not terminate");
        size_t maxlen = 0;
        for (const auto& [key, coeff] : rest.terms()) maxlen = std::max(maxlen, key.word.size());
        UEAWord peel(N);
        for (const auto& [key, coeff] : rest.terms()) {
            if (key.word.size() != maxlen) continue;
            std::vector<int> b(N, 0);
            for (int g : key.word) b[g] += 1;
            PolySection mono(0, N);
            mono.add(key.k, b, BasePoly(0, coeff));
            out += mono;
            UEAWord sym = symmetrize_monomial(b, N);
            for (const auto& [wk, wc] : sym.terms()) {
                UEAKey shifted = wk;
                shifted.k += key.k;
                peel.add(shifted, wc * coeff);
            }
        }
        rest += Scalar(-1) * normal_order(peel, c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// phi and Gutt comparison reports

/// Exact rank over the rationals of a matrix of Scalars (Gauss elimination).
inline int rational_rank(std::vector<std::vector<Scalar>> m,
                         std::vector<Scalar>* kernel_witness = nullptr) {
    const int rows = (int)m.size();
    if (rows == 0) return 0;
    const int cols = (int)m[0].size();
    // track row operations for a kernel vector on deficiency
    std::vector<std::vector<Scalar>> ops(rows, std::vector<Scalar>(rows, Scalar(0)));
    for (int i = 0; i < rows; ++i) ops[i][i] = Scalar(1);
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int pivot = -1;
        for (int i = rank; i < rows; ++i)
            if (!m[i][col].is_zero()) { pivot = i; break; }
        if (pivot < 0) continue;
        std::swap(m[pivot], m[rank]);
        std::swap(ops[pivot], ops[rank]);
        for (int i = rank + 1; i < rows; ++i) {
            if (m[i][col].is_zero()) continue;
            Scalar f = m[i][col] / m[rank][col];
            for (int j = col; j < cols; ++j) m[i][j] -= f * m[rank][j];
            for (int j = 0; j < rows; ++j) ops[i][j] -= f * ops[rank][j];
        }
        ++rank;
    }
    if (kernel_witness && rank < rows) {
        for (int i = rank; i < rows; ++i) {
            bool zero_row = true;
            for (int j = 0; j < cols; ++j)
                if (!m[i][j].is_zero()) zero_row = false;
            if (zero_row) { *kernel_witness = ops[i]; break; }
        }
    }
    return rank;
}

/// All non-decreasing words of length <= d over N letters.
inline std::vector<std::vector<int>> pbw_words(int N, int d) {
    std::vector<std::vector<int>> out{{}};
    std::vector<std::vector<int>> frontier{{}};
    for (int len = 1; len <= d; ++len) {
        std::vector<std::vector<int>> next;
        for (const auto& w : frontier)
            for (int g = w.empty() ? 0 : w.back(); g < N; ++g) {
                auto e = w;
                e.push_back(g);
                next.push_back(e);
            }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

/// Check the defining relations of the enveloping algebra inside the
/// Weyl-ordered deformed algebra and the injectivity of the induced map at
/// bounded PBW degree (exact rank over the rationals).
inline CheckReport phi_check(const FedosovSolution& sol, int max_degree) {
    const FedosovSetup& s = sol.setup;
    if (s.n() != 0) throw input_error("phi_check: point base required");
    if (s.kappa != Scalar(1, 2)) throw input_error("phi_check: Weyl ordering required");
    if (!s.B.is_zero()) throw input_error("phi_check: B = 0 required");
    const int N = s.N();
    CheckReport rep;
    // (a) [e_a, e_b]_* = -nu c^g_{ab} e_g
    bool rel_ok = true;
    std::string rel_detail;
    for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b) {
            PolySection ea = PolySection::generator(0, N, a);
            PolySection eb = PolySection::generator(0, N, b);
            PolySection comm = star_product(ea, eb, sol) - star_product(eb, ea, sol);
            PolySection expected(0, N);
            for (int g = 0; g < N; ++g)
                expected += Scalar(-1) * s.chart->chart().c(a, b, g).constant_term() *
                            PolySection::generator(0, N, g).nu_shift(1);
            if (comm != expected) {
                rel_ok = false;
                rel_detail = "commutator (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                             ") = " + comm.str() + ", expected " + expected.str();
            }
        }
    rep.add("weyl commutator relations", rel_ok, rel_detail);
    // (b) injectivity at bounded degree
    auto words = pbw_words(N, max_degree);
    std::map<PSKey, int> columns;
    std::vector<PolySection> images;
    for (const auto& w : words) {
        PolySection img = PolySection::one(0, N);
        for (int g : w) img = star_product(img, PolySection::generator(0, N, g), sol);
        for (const auto& [key, u] : img.terms()) columns.emplace(key, 0);
        images.push_back(std::move(img));
    }
    int idx = 0;
    for (auto& [key, i] : columns) i = idx++;
    std::vector<std::vector<Scalar>> matrix(words.size(),
                                            std::vector<Scalar>(columns.size(), Scalar(0)));
    for (size_t i = 0; i < images.size(); ++i)
        for (const auto& [key, u] : images[i].terms())
            matrix[i][columns[key]] = u.constant_term();
    std::vector<Scalar> kernel;
    int rank = rational_rank(matrix, &kernel);
    bool full = rank == (int)words.size();
    std::string detail = "rank " + std::to_string(rank) + " of " + std::to_string(words.size());
    if (!full && !kernel.empty()) {
        detail += "; kernel vector:";
        for (size_t i = 0; i < kernel.size(); ++i)
            if (!kernel[i].is_zero()) {
                detail += " (" + kernel[i].str() + ")*w" + std::to_string(i);
            }
    }
    rep.add("phi injectivity at degree <= " + std::to_string(max_degree), full, detail);
    return rep;
}

/// Compare the Weyl star product of fibre monomials against the
/// symmetrisation transport through the enveloping-algebra oracle. Mismatches
/// are reported verbatim as findings, not silent failures.
inline CheckReport gutt_compare(const FedosovSolution& sol, int max_degree) {
    const FedosovSetup& s = sol.setup;
    if (s.n() != 0) throw input_error("gutt_compare: point base required");
    const int N = s.N();
    auto c = point_structure_constants(*s.chart);
    CheckReport rep;
    auto words = pbw_words(N, max_degree);
    for (const auto& wf : words)
        for (const auto& wg : words) {
            std::vector<int> bf(N, 0), bg(N, 0);
            for (int g : wf) bf[g] += 1;
            for (int g : wg) bg[g] += 1;
            PolySection f(0, N), g(0, N);
            f.add(0, bf, BasePoly(0, Scalar(1)));
            g.add(0, bg, BasePoly(0, Scalar(1)));
            PolySection lhs = star_product(f, g, sol);
            UEAWord prod = symmetrize_section(f) * symmetrize_section(g);
            PolySection rhs = unsymmetrize(normal_order(prod, c), *s.chart, c);
            std::string name = "star(" + f.str() + ", " + g.str() + ")";
            if (lhs == rhs) {
                rep.add(name, true);
            } else {
                rep.add(name, false, "star route " + lhs.str() + " vs symmetrisation route " +
                                         rhs.str());
            }
        }
    return rep;
}

}  // namespace estar
