#pragma once
// Polynomial flux expressions in (u, v): parser, exact rational arithmetic,
// symbolic partials and compiled double-precision evaluators.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "linalg.hpp"

namespace hypci::dsl {

inline constexpr int kMaxDegree = 12;

class DslError : public std::runtime_error {
public:
    enum class Kind { Syntax, NonPolynomial, Degree, Overflow };
    DslError(Kind k, std::size_t pos, const std::string& what)
        : std::runtime_error(label(k) + " at column " + std::to_string(pos + 1) + ": " + what), kind_(k), pos_(pos) {}
    Kind kind() const { return kind_; }
    std::size_t position() const { return pos_; }  // 0-based offset into the source text
    static std::string label(Kind k) {
        switch (k) {
            case Kind::Syntax: return "syntax-error";
            case Kind::NonPolynomial: return "non-polynomial-error";
            case Kind::Degree: return "degree-error";
            case Kind::Overflow: return "overflow-error";
        }
        return "error";
    }

private:
    Kind kind_;
    std::size_t pos_;
};

// ---------------------------------------------------------------- Rational

struct Rational {
    std::int64_t num = 0, den = 1;

    Rational() = default;
    Rational(std::int64_t n) : num(n), den(1) {}  // NOLINT implicit on purpose
    static Rational make(__int128 n, __int128 d) {
        if (d == 0) throw std::domain_error("rational with zero denominator");
        if (d < 0) { n = -n; d = -d; }
        __int128 g = gcd128(n < 0 ? -n : n, d);
        if (g > 1) { n /= g; d /= g; }
        constexpr __int128 lim = static_cast<__int128>(INT64_MAX);
        if (n > lim || n < -lim || d > lim) throw std::overflow_error("rational overflow");
        Rational r;
        r.num = static_cast<std::int64_t>(n);
        r.den = static_cast<std::int64_t>(d);
        return r;
    }
    bool is_zero() const { return num == 0; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    friend Rational operator+(const Rational& a, const Rational& b) {
        return make(static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den,
                    static_cast<__int128>(a.den) * b.den);
    }
    friend Rational operator-(const Rational& a) { return make(-static_cast<__int128>(a.num), a.den); }
    friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return make(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        return make(static_cast<__int128>(a.num) * b.den, static_cast<__int128>(a.den) * b.num);
    }
    friend bool operator==(const Rational& a, const Rational& b) { return a.num == b.num && a.den == b.den; }
    std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

private:
    static __int128 gcd128(__int128 a, __int128 b) {
        while (b != 0) { __int128 t = a % b; a = b; b = t; }
        return a == 0 ? 1 : a;
    }
};

// ---------------------------------------------------------------- AST

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { Num, U, V, Add, Sub, Mul, Div, Pow, Neg };
    Kind kind;
    Rational value;  // Num
    int exponent = 0;  // Pow
    NodePtr lhs, rhs;  // binary operands; Neg and Pow use lhs
    std::size_t pos = 0;  // source offset of the token that built the node
};

inline bool same_tree(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Node::Kind::Num: return a.value == b.value;
        case Node::Kind::U:
        case Node::Kind::V: return true;
        case Node::Kind::Neg: return same_tree(*a.lhs, *b.lhs);
        case Node::Kind::Pow: return a.exponent == b.exponent && same_tree(*a.lhs, *b.lhs);
        default: return same_tree(*a.lhs, *b.lhs) && same_tree(*a.rhs, *b.rhs);
    }
}

struct FluxExpr {
    std::array<NodePtr, 2> comp;
    std::string source;
};

inline bool same_tree(const FluxExpr& a, const FluxExpr& b) {
    return same_tree(*a.comp[0], *b.comp[0]) && same_tree(*a.comp[1], *b.comp[1]);
}

// ---------------------------------------------------------------- printing

namespace detail {

inline int precedence(Node::Kind k) {
    switch (k) {
        case Node::Kind::Add:
        case Node::Kind::Sub: return 1;
        case Node::Kind::Mul:
        case Node::Kind::Div: return 2;
        case Node::Kind::Neg: return 3;
        case Node::Kind::Pow: return 4;
        default: return 5;
    }
}

// Literals are terminating decimals, so an exact decimal rendering always exists.
inline std::string decimal(const Rational& r) {
    if (r.den == 1) return std::to_string(r.num);
    std::int64_t d = r.den;
    int twos = 0, fives = 0;
    while (d % 2 == 0) { d /= 2; ++twos; }
    while (d % 5 == 0) { d /= 5; ++fives; }
    if (d != 1) return r.str();  // unreachable for parsed literals
    const int digits = std::max(twos, fives);
    __int128 scaled = r.num;
    for (int i = 0; i < digits; ++i) scaled *= 10;
    scaled /= r.den;
    std::string s;
    __int128 q = scaled < 0 ? -scaled : scaled;
    while (q > 0) { s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(q % 10))); q /= 10; }
    while (static_cast<int>(s.size()) <= digits) s.insert(s.begin(), '0');
    s.insert(s.end() - digits, '.');
    return (scaled < 0 ? "-" : "") + s;
}

inline void print(const Node& n, std::ostream& os) {
    auto child = [&os](const Node& c, bool parens) {
        if (parens) os << '(';
        print(c, os);
        if (parens) os << ')';
    };
    const int p = precedence(n.kind);
    switch (n.kind) {
        case Node::Kind::Num: os << decimal(n.value); break;
        case Node::Kind::U: os << 'u'; break;
        case Node::Kind::V: os << 'v'; break;
        case Node::Kind::Neg:
            os << '-';
            child(*n.lhs, precedence(n.lhs->kind) < p);
            break;
        case Node::Kind::Pow:
            child(*n.lhs, precedence(n.lhs->kind) < 5);
            os << '^' << n.exponent;
            break;
        default: {
            const char op = n.kind == Node::Kind::Add ? '+' : n.kind == Node::Kind::Sub ? '-' : n.kind == Node::Kind::Mul ? '*' : '/';
            child(*n.lhs, precedence(n.lhs->kind) < p);
            os << ' ' << op << ' ';
            child(*n.rhs, precedence(n.rhs->kind) <= p);
        }
    }
}

}  // namespace detail

inline std::string to_string(const Node& n) {
    std::ostringstream os;
    detail::print(n, os);
    return os.str();
}

inline std::string to_string(const FluxExpr& e) { return "(" + to_string(*e.comp[0]) + ", " + to_string(*e.comp[1]) + ")"; }

// ---------------------------------------------------------------- polynomials

// exponent pair (pu, pv) -> exact coefficient; zero coefficients never stored
class Polynomial {
public:
    using Key = std::pair<int, int>;
    std::map<Key, Rational> terms;

    static Polynomial constant(const Rational& c) {
        Polynomial p;
        if (!c.is_zero()) p.terms[{0, 0}] = c;
        return p;
    }
    static Polynomial var(int which) {
        Polynomial p;
        p.terms[which == 0 ? Key{1, 0} : Key{0, 1}] = Rational(1);
        return p;
    }
    int degree() const {
        int d = 0;
        for (const auto& [k, c] : terms) d = std::max(d, k.first + k.second);
        return d;
    }
    bool is_constant() const { return terms.empty() || (terms.size() == 1 && terms.begin()->first == Key{0, 0}); }
    Rational constant_term() const {
        auto it = terms.find({0, 0});
        return it == terms.end() ? Rational(0) : it->second;
    }
    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        Polynomial r = a;
        for (const auto& [k, c] : b.terms) r.accumulate(k, c);
        return r;
    }
    friend Polynomial operator-(const Polynomial& a) {
        Polynomial r;
        for (const auto& [k, c] : a.terms) r.terms[k] = -c;
        return r;
    }
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial r;
        for (const auto& [ka, ca] : a.terms)
            for (const auto& [kb, cb] : b.terms) r.accumulate({ka.first + kb.first, ka.second + kb.second}, ca * cb);
        return r;
    }
    Polynomial scaled(const Rational& s) const {
        Polynomial r;
        if (s.is_zero()) return r;
        for (const auto& [k, c] : terms) r.terms[k] = c * s;
        return r;
    }
    // d/du (which = 0) or d/dv (which = 1), exact
    Polynomial derivative(int which) const {
        Polynomial r;
        for (const auto& [k, c] : terms) {
            const int e = which == 0 ? k.first : k.second;
            if (e == 0) continue;
            const Key nk = which == 0 ? Key{k.first - 1, k.second} : Key{k.first, k.second - 1};
            r.accumulate(nk, c * Rational(e));
        }
        return r;
    }
    Rational eval_exact(const Rational& u, const Rational& v) const {
        Rational acc;
        for (const auto& [k, c] : terms) {
            Rational m = c;
            for (int i = 0; i < k.first; ++i) m = m * u;
            for (int i = 0; i < k.second; ++i) m = m * v;
            acc = acc + m;
        }
        return acc;
    }
    friend bool operator==(const Polynomial& a, const Polynomial& b) {
        if (a.terms.size() != b.terms.size()) return false;
        auto ia = a.terms.begin();
        for (auto ib = b.terms.begin(); ib != b.terms.end(); ++ia, ++ib)
            if (ia->first != ib->first || !(ia->second == ib->second)) return false;
        return true;
    }

private:
    void accumulate(const Key& k, const Rational& c) {
        auto it = terms.find(k);
        if (it == terms.end()) {
            if (!c.is_zero()) terms.emplace(k, c);
            return;
        }
        it->second = it->second + c;
        if (it->second.is_zero()) terms.erase(it);
    }
};

// Flat monomial list for fast evaluation.
class CompiledPoly {
public:
    CompiledPoly() = default;
    explicit CompiledPoly(const Polynomial& p) {
        for (const auto& [k, c] : p.terms) monos_.push_back({c.to_double(), k.first, k.second});
    }
    // powers arrays hold u^0..u^kMaxDegree and v^0..v^kMaxDegree
    double eval(const double* pu, const double* pv) const {
        double s = 0.0;
        for (const auto& m : monos_) s += m.c * pu[m.eu] * pv[m.ev];
        return s;
    }
    bool empty() const { return monos_.empty(); }

private:
    struct Mono { double c; int eu, ev; };
    std::vector<Mono> monos_;
};

// ---------------------------------------------------------------- parser

namespace detail {

class Parser {
public:
    explicit Parser(const std::string& s) : src_(s) {}

    FluxExpr parse_flux() {
        FluxExpr out;
        out.source = src_;
        expect('(');
        out.comp[0] = expr();
        expect(',');
        out.comp[1] = expr();
        expect(')');
        skip_ws();
        if (i_ < src_.size()) fail("unexpected trailing input '" + std::string(1, src_[i_]) + "'");
        return out;
    }

    NodePtr parse_single() {
        NodePtr e = expr();
        skip_ws();
        if (i_ < src_.size()) fail("unexpected trailing input '" + std::string(1, src_[i_]) + "'");
        return e;
    }

private:
    const std::string& src_;
    std::size_t i_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw DslError(DslError::Kind::Syntax, i_, msg); }
    void skip_ws() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    }
    bool peek(char c) {
        skip_ws();
        return i_ < src_.size() && src_[i_] == c;
    }
    void expect(char c) {
        skip_ws();
        if (i_ >= src_.size()) fail(std::string("expected '") + c + "' but input ended");
        if (src_[i_] != c) fail(std::string("expected '") + c + "' but found '" + src_[i_] + "'");
        ++i_;
    }
    static NodePtr make(Node::Kind k, std::size_t pos, NodePtr l = nullptr, NodePtr r = nullptr) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->pos = pos;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    NodePtr expr() {
        NodePtr l = term();
        for (;;) {
            skip_ws();
            if (i_ < src_.size() && (src_[i_] == '+' || src_[i_] == '-')) {
                const auto k = src_[i_] == '+' ? Node::Kind::Add : Node::Kind::Sub;
                const std::size_t p = i_++;
                l = make(k, p, l, term());
            } else {
                return l;
            }
        }
    }
    NodePtr term() {
        NodePtr l = unary();
        for (;;) {
            skip_ws();
            if (i_ < src_.size() && (src_[i_] == '*' || src_[i_] == '/')) {
                const auto k = src_[i_] == '*' ? Node::Kind::Mul : Node::Kind::Div;
                const std::size_t p = i_++;
                l = make(k, p, l, unary());
            } else {
                return l;
            }
        }
    }
    NodePtr unary() {
        skip_ws();
        if (i_ < src_.size() && src_[i_] == '-') {
            const std::size_t p = i_++;
            return make(Node::Kind::Neg, p, unary());
        }
        if (i_ < src_.size() && src_[i_] == '+') fail("unary '+' is not supported");
        return power();
    }
    NodePtr power() {
        NodePtr base = primary();
        skip_ws();
        if (i_ < src_.size() && src_[i_] == '^') {
            const std::size_t p = i_++;
            skip_ws();
            const std::size_t ep = i_;
            if (i_ < src_.size() && src_[i_] == '-')
                throw DslError(DslError::Kind::NonPolynomial, ep, "negative exponent");
            if (i_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[i_])))
                fail("exponent must be a non-negative integer literal");
            long e = 0;
            while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
                e = e * 10 + (src_[i_] - '0');
                if (e > 1000) throw DslError(DslError::Kind::Degree, ep, "exponent too large");
                ++i_;
            }
            if (i_ < src_.size() && src_[i_] == '.')
                throw DslError(DslError::Kind::NonPolynomial, ep, "fractional exponent");
            auto n = make(Node::Kind::Pow, p, base);
            std::const_pointer_cast<Node>(n)->exponent = static_cast<int>(e);
            skip_ws();
            if (i_ < src_.size() && src_[i_] == '^') fail("chained '^' needs parentheses");
            return n;
        }
        return base;
    }
    NodePtr primary() {
        skip_ws();
        if (i_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[i_];
        const std::size_t p = i_;
        if (c == '(') {
            ++i_;
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id;
            while (i_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) id += src_[i_++];
            if (id == "u") return make(Node::Kind::U, p);
            if (id == "v") return make(Node::Kind::V, p);
            static const char* transcendental[] = {"sin", "cos", "tan", "exp", "log", "ln", "sqrt", "abs", "tanh", "sinh", "cosh", "atan"};
            for (const char* t : transcendental)
                if (id == t) throw DslError(DslError::Kind::NonPolynomial, p, "function '" + id + "' is not polynomial");
            i_ = p;
            fail("unknown identifier '" + id + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
    NodePtr number() {
        const std::size_t p = i_;
        __int128 mant = 0;
        std::int64_t den = 1;
        bool digits = false, frac = false;
        while (i_ < src_.size()) {
            const char c = src_[i_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                mant = mant * 10 + (c - '0');
                if (frac) {
                    if (den > INT64_MAX / 10) throw DslError(DslError::Kind::Overflow, p, "literal has too many digits");
                    den *= 10;
                }
                if (mant > static_cast<__int128>(INT64_MAX)) throw DslError(DslError::Kind::Overflow, p, "literal too large");
                digits = true;
                ++i_;
            } else if (c == '.' && !frac) {
                frac = true;
                ++i_;
            } else {
                break;
            }
        }
        if (!digits) { i_ = p; fail("malformed number"); }
        if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) fail("exponent notation is not supported in literals");
        auto n = make(Node::Kind::Num, p);
        std::const_pointer_cast<Node>(n)->value = Rational::make(mant, den);
        return n;
    }
};

inline Polynomial lower(const Node& n) {
    auto checked = [&n](Polynomial p) {
        if (p.degree() > kMaxDegree)
            throw DslError(DslError::Kind::Degree, n.pos, "total degree exceeds " + std::to_string(kMaxDegree));
        return p;
    };
    try {
        switch (n.kind) {
            case Node::Kind::Num: return Polynomial::constant(n.value);
            case Node::Kind::U: return Polynomial::var(0);
            case Node::Kind::V: return Polynomial::var(1);
            case Node::Kind::Neg: return -lower(*n.lhs);
            case Node::Kind::Add: return lower(*n.lhs) + lower(*n.rhs);
            case Node::Kind::Sub: return lower(*n.lhs) - lower(*n.rhs);
            case Node::Kind::Mul: return checked(lower(*n.lhs) * lower(*n.rhs));
            case Node::Kind::Div: {
                Polynomial den = lower(*n.rhs);
                if (!den.is_constant())
                    throw DslError(DslError::Kind::NonPolynomial, n.pos, "division by a non-constant expression");
                if (den.terms.empty()) throw DslError(DslError::Kind::NonPolynomial, n.pos, "division by zero");
                return lower(*n.lhs).scaled(Rational(1) / den.constant_term());
            }
            case Node::Kind::Pow: {
                Polynomial base = lower(*n.lhs);
                if (!base.is_constant() && static_cast<long>(base.degree()) * n.exponent > kMaxDegree)
                    throw DslError(DslError::Kind::Degree, n.pos, "total degree exceeds " + std::to_string(kMaxDegree));
                Polynomial r = Polynomial::constant(Rational(1));
                for (int i = 0; i < n.exponent; ++i) r = r * base;
                return r;
            }
        }
    } catch (const std::overflow_error&) {
        throw DslError(DslError::Kind::Overflow, n.pos, "coefficient overflow");
    }
    return {};
}

}  // namespace detail

// Rejects non-polynomial constructs and the degree guard at parse time.
inline FluxExpr parse_flux(const std::string& text) {
    FluxExpr e = detail::Parser(text).parse_flux();
    for (const auto& c : e.comp) (void)detail::lower(*c);
    return e;
}

inline NodePtr parse_expr(const std::string& text) { return detail::Parser(text).parse_single(); }

inline Polynomial to_polynomial(const Node& n) { return detail::lower(n); }

// Exact symbolic jet polynomials: f_k, df_k/du_i, d2f_k/du_i du_j.
struct SymbolicJet {
    std::array<Polynomial, 2> f;
    std::array<std::array<Polynomial, 2>, 2> df;
    std::array<std::array<std::array<Polynomial, 2>, 2>, 2> d2f;
};

inline SymbolicJet symbolic_jet(const FluxExpr& e) {
    SymbolicJet j;
    for (int k = 0; k < 2; ++k) {
        j.f[k] = to_polynomial(*e.comp[k]);
        for (int a = 0; a < 2; ++a) {
            j.df[k][a] = j.f[k].derivative(a);
            for (int b = 0; b < 2; ++b) j.d2f[k][a][b] = j.df[k][a].derivative(b);
        }
    }
    return j;
}

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FluxJet {
    Vec2 f;
    Mat2 Df;
    Hess2 D2f;
};

// Compiled evaluators for f, Df and D2f; states outside `radius` are rejected.
class FluxModel {
public:
    FluxModel() = default;
    FluxModel(const FluxExpr& e, double radius) : expr_(e), jet_(symbolic_jet(e)), radius_(radius) {
        int deg = 0;
        for (int k = 0; k < 2; ++k) {
            f_[k] = CompiledPoly(jet_.f[k]);
            deg = std::max(deg, jet_.f[k].degree());
            for (int a = 0; a < 2; ++a) {
                df_[k][a] = CompiledPoly(jet_.df[k][a]);
                for (int b = 0; b < 2; ++b) d2f_[k][a][b] = CompiledPoly(jet_.d2f[k][a][b]);
            }
        }
        degree_ = deg;
    }

    double radius() const { return radius_; }
    int degree() const { return degree_; }
    const FluxExpr& expr() const { return expr_; }
    const SymbolicJet& symbolic() const { return jet_; }
    std::string text() const { return to_string(expr_); }

    void check_domain(const Vec2& u) const {
        if (!(norm(u) <= radius_))
            throw DomainError("domain-exceeded: |u| = " + std::to_string(norm(u)) + " > radius " + std::to_string(radius_));
    }
    Vec2 flux(const Vec2& u) const {
        check_domain(u);
        double pu[kMaxDegree + 1], pv[kMaxDegree + 1];
        powers(u, pu, pv);
        return {f_[0].eval(pu, pv), f_[1].eval(pu, pv)};
    }
    FluxJet jet(const Vec2& u) const {
        check_domain(u);
        double pu[kMaxDegree + 1], pv[kMaxDegree + 1];
        powers(u, pu, pv);
        FluxJet j;
        for (int k = 0; k < 2; ++k) {
            j.f[k] = f_[k].eval(pu, pv);
            for (int a = 0; a < 2; ++a) {
                j.Df.at(k, a) = df_[k][a].eval(pu, pv);
                for (int b = 0; b < 2; ++b) j.D2f.comp[k].at(a, b) = d2f_[k][a][b].eval(pu, pv);
            }
        }
        return j;
    }
    Mat2 jacobian(const Vec2& u) const {
        check_domain(u);
        double pu[kMaxDegree + 1], pv[kMaxDegree + 1];
        powers(u, pu, pv);
        Mat2 m;
        for (int k = 0; k < 2; ++k)
            for (int a = 0; a < 2; ++a) m.at(k, a) = df_[k][a].eval(pu, pv);
        return m;
    }

private:
    void powers(const Vec2& u, double* pu, double* pv) const {
        pu[0] = pv[0] = 1.0;
        for (int i = 1; i <= degree_; ++i) {
            pu[i] = pu[i - 1] * u.x;
            pv[i] = pv[i - 1] * u.y;
        }
    }

    FluxExpr expr_;
    SymbolicJet jet_;
    std::array<CompiledPoly, 2> f_;
    std::array<std::array<CompiledPoly, 2>, 2> df_;
    std::array<std::array<std::array<CompiledPoly, 2>, 2>, 2> d2f_;
    double radius_ = 1.0;
    int degree_ = 0;
};

inline FluxModel differentiate(const FluxExpr& e, double radius = 1.0) { return FluxModel(e, radius); }

inline FluxJet eval_expr(const FluxModel& m, const Vec2& u) { return m.jet(u); }

inline constexpr const char* kExample61 = "(u*v/2 + v, u - v^2/2)";

// Accepts the builtin name "example61" or a flux text.
inline FluxModel load_flux(const std::string& spec, double radius = 1.0) {
    const std::string text = spec == "example61" ? kExample61 : spec;
    try {
        return differentiate(parse_flux(text), radius);
    } catch (const DslError& first) {
        if (first.kind() != DslError::Kind::Syntax) throw;
        // the CLI also takes the bare "<expr>,<expr>" form
        try {
            return differentiate(parse_flux("(" + text + ")"), radius);
        } catch (const DslError&) {
            throw first;
        }
    }
}

}  // namespace hypci::dsl
