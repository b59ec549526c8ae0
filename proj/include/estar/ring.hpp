#pragma once

// Exact coefficient arithmetic: arbitrary-precision rationals (GMP) and
// multivariate polynomials over a fixed base coordinate chart q1..qn.
// Everything is a value; all operations are pure.

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace estar {

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct internal_error : std::logic_error {
    using std::logic_error::logic_error;
};

/// Exact rational, always kept in canonical reduced form
/// (gcd(num, den) = 1, den > 0).
class Scalar {
  public:
    Scalar() : v_(0) {}
    Scalar(long n) : v_(n) {}
    Scalar(long n, long d) : v_(n, d) {
        if (d == 0) throw input_error("Scalar: zero denominator");
        v_.canonicalize();
    }
    explicit Scalar(const mpq_class& q) : v_(q) { v_.canonicalize(); }

    static Scalar from_string(const std::string& s) {
        mpq_class q;
        if (q.set_str(s, 10) != 0) throw input_error("Scalar: bad literal '" + s + "'");
        q.canonicalize();
        return Scalar(q);
    }

    bool is_zero() const { return sgn(v_) == 0; }
    bool is_negative() const { return sgn(v_) < 0; }
    bool is_one() const { return v_ == 1; }

    Scalar operator-() const { return Scalar(mpq_class(-v_)); }
    Scalar& operator+=(const Scalar& o) { v_ += o.v_; return *this; }
    Scalar& operator-=(const Scalar& o) { v_ -= o.v_; return *this; }
    Scalar& operator*=(const Scalar& o) { v_ *= o.v_; return *this; }
    Scalar& operator/=(const Scalar& o) {
        if (o.is_zero()) throw input_error("Scalar: division by zero");
        v_ /= o.v_;
        return *this;
    }
    friend Scalar operator+(Scalar a, const Scalar& b) { a += b; return a; }
    friend Scalar operator-(Scalar a, const Scalar& b) { a -= b; return a; }
    friend Scalar operator*(Scalar a, const Scalar& b) { a *= b; return a; }
    friend Scalar operator/(Scalar a, const Scalar& b) { a /= b; return a; }
    friend bool operator==(const Scalar& a, const Scalar& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Scalar& a, const Scalar& b) { return a.v_ != b.v_; }
    friend bool operator<(const Scalar& a, const Scalar& b) { return a.v_ < b.v_; }

    /// abs(numerator) == 1 and denominator == 1
    bool is_unit_magnitude() const { return v_ == 1 || v_ == -1; }

    std::string str() const { return v_.get_str(); }

  private:
    mpq_class v_;
};

inline Scalar pow(Scalar base, int e) {
    Scalar r(1);
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

inline Scalar factorial(int k) {
    Scalar r(1);
    for (int i = 2; i <= k; ++i) r *= Scalar(i);
    return r;
}

using Expo = std::vector<int>;  // exponent vector, length = arity n

/// Multivariate polynomial in q1..qn with Scalar coefficients.
/// Terms are kept sorted lexicographically on the exponent vector and no
/// zero coefficient is ever stored, so equal polynomials compare equal
/// term-by-term.
class BasePoly {
  public:
    BasePoly() : n_(0) {}
    explicit BasePoly(int n) : n_(n) {}
    BasePoly(int n, const Scalar& c) : n_(n) {
        if (!c.is_zero()) terms_[Expo(n, 0)] = c;
    }

    static BasePoly constant(int n, const Scalar& c) { return BasePoly(n, c); }
    static BasePoly variable(int n, int i) {  // q^i, 1-based
        if (i < 1 || i > n) throw input_error("BasePoly: variable index out of range");
        BasePoly p(n);
        Expo e(n, 0);
        e[i - 1] = 1;
        p.terms_[e] = Scalar(1);
        return p;
    }
    static BasePoly monomial(int n, const Expo& e, const Scalar& c) {
        if ((int)e.size() != n) throw input_error("BasePoly: exponent arity mismatch");
        BasePoly p(n);
        if (!c.is_zero()) p.terms_[e] = c;
        return p;
    }

    int arity() const { return n_; }
    bool is_zero() const { return terms_.empty(); }
    const std::map<Expo, Scalar>& terms() const { return terms_; }

    void add_term(const Expo& e, const Scalar& c) {
        if (c.is_zero()) return;
        auto it = terms_.find(e);
        if (it == terms_.end()) {
            terms_[e] = c;
        } else {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    BasePoly& operator+=(const BasePoly& o) {
        check_arity(o);
        for (const auto& [e, c] : o.terms_) add_term(e, c);
        return *this;
    }
    BasePoly& operator-=(const BasePoly& o) {
        check_arity(o);
        for (const auto& [e, c] : o.terms_) add_term(e, -c);
        return *this;
    }
    friend BasePoly operator+(BasePoly a, const BasePoly& b) { a += b; return a; }
    friend BasePoly operator-(BasePoly a, const BasePoly& b) { a -= b; return a; }
    BasePoly operator-() const {
        BasePoly r(n_);
        for (const auto& [e, c] : terms_) r.terms_[e] = -c;
        return r;
    }

    friend BasePoly operator*(const BasePoly& a, const BasePoly& b) {
        a.check_arity(b);
        BasePoly r(a.n_);
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_) {
                Expo e(a.n_);
                for (int i = 0; i < a.n_; ++i) e[i] = ea[i] + eb[i];
                r.add_term(e, ca * cb);
            }
        return r;
    }
    BasePoly& operator*=(const BasePoly& o) { *this = *this * o; return *this; }
    friend BasePoly operator*(const Scalar& c, const BasePoly& p) {
        BasePoly r(p.n_);
        if (c.is_zero()) return r;
        for (const auto& [e, pc] : p.terms_) r.terms_[e] = c * pc;
        return r;
    }

    friend bool operator==(const BasePoly& a, const BasePoly& b) {
        return a.n_ == b.n_ && a.terms_ == b.terms_;
    }
    friend bool operator!=(const BasePoly& a, const BasePoly& b) { return !(a == b); }
    friend bool operator<(const BasePoly& a, const BasePoly& b) {
        if (a.n_ != b.n_) return a.n_ < b.n_;
        auto ia = a.terms_.begin(), ib = b.terms_.begin();
        for (; ia != a.terms_.end() && ib != b.terms_.end(); ++ia, ++ib) {
            if (ia->first != ib->first) return ia->first < ib->first;
            if (ia->second != ib->second) return ia->second < ib->second;
        }
        return ib != b.terms_.end();
    }

    /// ∂/∂q^i, 1-based index
    BasePoly diff(int i) const {
        if (i < 1 || i > n_) throw input_error("poly_diff: index out of range");
        BasePoly r(n_);
        for (const auto& [e, c] : terms_) {
            if (e[i - 1] == 0) continue;
            Expo d = e;
            d[i - 1] -= 1;
            r.add_term(d, Scalar(e[i - 1]) * c);
        }
        return r;
    }

    int total_degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int x : e) s += x;
            if (s > d) d = s;
        }
        return d;
    }

    Scalar constant_term() const {
        auto it = terms_.find(Expo(n_, 0));
        return it == terms_.end() ? Scalar(0) : it->second;
    }

    /// Canonical text form, e.g. "q1^2*q2 - 1/2*q1 + 3".
    std::string str(const std::string& var = "q") const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [e, c] : terms_) {
            Scalar a = c;
            if (first) {
                if (a.is_negative()) { os << "-"; a = -a; }
            } else {
                os << (a.is_negative() ? " - " : " + ");
                if (a.is_negative()) a = -a;
            }
            first = false;
            bool has_var = false;
            for (int x : e) if (x > 0) has_var = true;
            if (!has_var) {
                os << a.str();
                continue;
            }
            bool lead = true;
            if (!a.is_one()) { os << a.str(); lead = false; }
            for (int i = 0; i < n_; ++i) {
                if (e[i] == 0) continue;
                if (!lead) os << "*";
                lead = false;
                os << var << (i + 1);
                if (e[i] > 1) os << "^" << e[i];
            }
        }
        return os.str();
    }

  private:
    void check_arity(const BasePoly& o) const {
        if (n_ != o.n_) throw input_error("BasePoly: coordinate arity mismatch");
    }
    int n_;
    std::map<Expo, Scalar> terms_;
};

inline BasePoly poly_mul(const BasePoly& a, const BasePoly& b) { return a * b; }
inline BasePoly poly_diff(const BasePoly& a, int i) { return a.diff(i); }

/// Truncation order for formal nu-series: L bounds the retained nu-power,
/// T bounds the retained total degree Deg = deg_s + deg_nu.
struct NuTruncation {
    int L = 4;
    int T = 6;
    NuTruncation() = default;
    NuTruncation(int total, int nu) : L(nu), T(total) {
        if (L < 0 || T < L) throw input_error("NuTruncation: need T >= L >= 0");
    }
    friend bool operator==(const NuTruncation& a, const NuTruncation& b) {
        return a.L == b.L && a.T == b.T;
    }
    friend bool operator!=(const NuTruncation& a, const NuTruncation& b) { return !(a == b); }
};

// ---------------------------------------------------------------------------
// Polynomial text syntax: rational literals, named variables, + - * ^ and
// parentheses. Used for base polynomials (q1..qn) and fibre polynomials
// (p1..pN, nu); the accepted variable set is supplied by the caller.

namespace detail {

struct PolyToken {
    enum Kind { Num, Var, Plus, Minus, Star, Caret, LParen, RParen, End } kind;
    std::string text;
    size_t pos;
};

class PolyLexer {
  public:
    explicit PolyLexer(const std::string& s) : s_(s), pos_(0) { advance(); }
    const PolyToken& peek() const { return tok_; }
    PolyToken next() {
        PolyToken t = tok_;
        advance();
        return t;
    }

  private:
    void advance() {
        while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
        tok_.pos = pos_;
        if (pos_ >= s_.size()) { tok_.kind = PolyToken::End; tok_.text = ""; return; }
        char c = s_[pos_];
        if (std::isdigit((unsigned char)c)) {
            size_t j = pos_;
            while (j < s_.size() && (std::isdigit((unsigned char)s_[j]) || s_[j] == '/')) ++j;
            // a '/' is part of the literal only when followed by a digit
            while (j > pos_ && s_[j - 1] == '/') --j;
            tok_.kind = PolyToken::Num;
            tok_.text = s_.substr(pos_, j - pos_);
            pos_ = j;
            return;
        }
        if (std::isalpha((unsigned char)c)) {
            size_t j = pos_;
            while (j < s_.size() && (std::isalnum((unsigned char)s_[j]) || s_[j] == '_')) ++j;
            tok_.kind = PolyToken::Var;
            tok_.text = s_.substr(pos_, j - pos_);
            pos_ = j;
            return;
        }
        ++pos_;
        switch (c) {
            case '+': tok_.kind = PolyToken::Plus; break;
            case '-': tok_.kind = PolyToken::Minus; break;
            case '*': tok_.kind = PolyToken::Star; break;
            case '^': tok_.kind = PolyToken::Caret; break;
            case '(': tok_.kind = PolyToken::LParen; break;
            case ')': tok_.kind = PolyToken::RParen; break;
            default:
                throw input_error("polynomial syntax: unexpected character '" +
                                  std::string(1, c) + "' at offset " + std::to_string(pos_ - 1));
        }
        tok_.text = std::string(1, c);
    }

    std::string s_;
    size_t pos_;
    PolyToken tok_;
};

// Generic recursive-descent parser over an abstract coefficient ring R.
// R must provide: R::zero(ctx), R::constant(ctx, Scalar), R::var(ctx, name),
// plus +, *, unary -.
template <class R, class Ctx>
R parse_poly_expr(PolyLexer& lex, const Ctx& ctx);

template <class R, class Ctx>
R parse_poly_factor(PolyLexer& lex, const Ctx& ctx) {
    PolyToken t = lex.peek();
    R base = [&]() -> R {
        switch (t.kind) {
            case PolyToken::Num:
                lex.next();
                return R::constant(ctx, Scalar::from_string(t.text));
            case PolyToken::Var:
                lex.next();
                return R::var(ctx, t.text);
            case PolyToken::LParen: {
                lex.next();
                R inner = parse_poly_expr<R>(lex, ctx);
                if (lex.peek().kind != PolyToken::RParen)
                    throw input_error("polynomial syntax: expected ')' at offset " +
                                      std::to_string(lex.peek().pos));
                lex.next();
                return inner;
            }
            case PolyToken::Minus:
                lex.next();
                return -parse_poly_factor<R>(lex, ctx);
            default:
                throw input_error("polynomial syntax: unexpected token at offset " +
                                  std::to_string(t.pos));
        }
    }();
    if (lex.peek().kind == PolyToken::Caret) {
        lex.next();
        PolyToken e = lex.next();
        if (e.kind != PolyToken::Num || e.text.find('/') != std::string::npos)
            throw input_error("polynomial syntax: exponent must be a non-negative integer");
        int k = std::stoi(e.text);
        R r = R::constant(ctx, Scalar(1));
        for (int i = 0; i < k; ++i) r = r * base;
        return r;
    }
    return base;
}

template <class R, class Ctx>
R parse_poly_term(PolyLexer& lex, const Ctx& ctx) {
    R r = parse_poly_factor<R>(lex, ctx);
    while (lex.peek().kind == PolyToken::Star) {
        lex.next();
        r = r * parse_poly_factor<R>(lex, ctx);
    }
    return r;
}

template <class R, class Ctx>
R parse_poly_expr(PolyLexer& lex, const Ctx& ctx) {
    bool neg = false;
    if (lex.peek().kind == PolyToken::Plus) lex.next();
    else if (lex.peek().kind == PolyToken::Minus) { lex.next(); neg = true; }
    R r = parse_poly_term<R>(lex, ctx);
    if (neg) r = -r;
    while (lex.peek().kind == PolyToken::Plus || lex.peek().kind == PolyToken::Minus) {
        bool minus = lex.next().kind == PolyToken::Minus;
        R t = parse_poly_term<R>(lex, ctx);
        r = minus ? r + (-t) : r + t;
    }
    return r;
}

struct BasePolyRing {
    using Self = BasePolyRing;
    BasePoly p;
    static Self zero(int n) { return {BasePoly(n)}; }
    static Self constant(int n, const Scalar& c) { return {BasePoly(n, c)}; }
    static Self var(int n, const std::string& name) {
        if (name.size() < 2 || name[0] != 'q')
            throw input_error("polynomial syntax: unknown variable '" + name + "'");
        int i = 0;
        try { i = std::stoi(name.substr(1)); } catch (...) {
            throw input_error("polynomial syntax: unknown variable '" + name + "'");
        }
        return {BasePoly::variable(n, i)};
    }
    Self operator-() const { return {-p}; }
    friend Self operator+(const Self& a, const Self& b) { return {a.p + b.p}; }
    friend Self operator*(const Self& a, const Self& b) { return {a.p * b.p}; }
};

}  // namespace detail

/// Parse a base polynomial in variables q1..qn from canonical text syntax.
inline BasePoly parse_base_poly(const std::string& text, int n) {
    detail::PolyLexer lex(text);
    detail::BasePolyRing r = detail::parse_poly_expr<detail::BasePolyRing>(lex, n);
    if (lex.peek().kind != detail::PolyToken::End)
        throw input_error("polynomial syntax: trailing input at offset " +
                          std::to_string(lex.peek().pos));
    return r.p;
}

}  // namespace estar
