#include <gtest/gtest.h>

#include <random>

#include "hypci/flux_dsl.hpp"

using namespace hypci;
using namespace hypci::dsl;

namespace {

// hand-written Jacobian and Hessian of the example system
Mat2 example_jacobian(double u, double v) { return {v / 2, u / 2 + 1, 1, -v}; }

DslError::Kind kind_of(const std::string& text) {
    try {
        parse_flux(text);
    } catch (const DslError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error for " << text;
    return DslError::Kind::Overflow;
}

std::size_t pos_of(const std::string& text) {
    try {
        auto e = parse_flux(text);
        (void)to_polynomial(*e.comp[0]);
        (void)to_polynomial(*e.comp[1]);
    } catch (const DslError& e) {
        return e.position();
    }
    ADD_FAILURE() << "no error for " << text;
    return 0;
}

}  // namespace

TEST(Rational, ExactArithmetic) {
    Rational a = Rational::make(1, 2), b = Rational::make(1, 3);
    EXPECT_EQ((a + b).str(), "5/6");
    EXPECT_EQ((a * b).str(), "1/6");
    EXPECT_EQ((a / b).str(), "3/2");
    EXPECT_EQ((a - a).str(), "0");
    EXPECT_EQ(Rational::make(4, -8).str(), "-1/2");
}

TEST(Parse, ExampleSystemPolynomials) {
    auto e = parse_flux("(u*v/2 + v, u - v^2/2)");
    Polynomial f1 = to_polynomial(*e.comp[0]);
    Polynomial f2 = to_polynomial(*e.comp[1]);
    EXPECT_EQ(f1.terms.size(), 2u);
    EXPECT_EQ(f1.terms.at({1, 1}).str(), "1/2");
    EXPECT_EQ(f1.terms.at({0, 1}).str(), "1");
    EXPECT_EQ(f2.terms.at({1, 0}).str(), "1");
    EXPECT_EQ(f2.terms.at({0, 2}).str(), "-1/2");
}

TEST(Parse, LinearWave) {
    FluxModel m = differentiate(parse_flux("(v, u)"));
    auto j = m.jet({0.3, -0.2});
    EXPECT_EQ(j.Df.a, 0.0);
    EXPECT_EQ(j.Df.b, 1.0);
    EXPECT_EQ(j.Df.c, 1.0);
    EXPECT_EQ(j.Df.d, 0.0);
    for (int k = 0; k < 2; ++k) EXPECT_EQ(max_abs(j.D2f.comp[k]), 0.0);
}

TEST(Parse, Precedence) {
    auto p = to_polynomial(*parse_expr("-u^2 + 2*u*v - 3"));
    EXPECT_EQ(p.terms.at({2, 0}).str(), "-1");
    EXPECT_EQ(p.terms.at({1, 1}).str(), "2");
    EXPECT_EQ(p.terms.at({0, 0}).str(), "-3");
    auto q = to_polynomial(*parse_expr("(-u)^2"));
    EXPECT_EQ(q.terms.at({2, 0}).str(), "1");
    auto r = to_polynomial(*parse_expr("1 - 2 - 3"));
    EXPECT_EQ(r.constant_term().str(), "-4");
    auto s = to_polynomial(*parse_expr("12/3/2"));
    EXPECT_EQ(s.constant_term().str(), "2");
    auto d = to_polynomial(*parse_expr("0.25*u"));
    EXPECT_EQ(d.terms.at({1, 0}).str(), "1/4");
}

TEST(Parse, Errors) {
    EXPECT_EQ(kind_of("(u/v, u)"), DslError::Kind::NonPolynomial);
    EXPECT_EQ(kind_of("(sin(u), v)"), DslError::Kind::NonPolynomial);
    EXPECT_EQ(kind_of("(u^-1, v)"), DslError::Kind::NonPolynomial);
    EXPECT_EQ(kind_of("(u, v"), DslError::Kind::Syntax);
    EXPECT_EQ(kind_of("(u + , v)"), DslError::Kind::Syntax);
    EXPECT_EQ(kind_of("(w, v)"), DslError::Kind::Syntax);
    EXPECT_EQ(kind_of("(u v, v)"), DslError::Kind::Syntax);
    EXPECT_EQ(kind_of("u, v"), DslError::Kind::Syntax);
    EXPECT_EQ(kind_of("(u, v) x"), DslError::Kind::Syntax);
}

TEST(Parse, ErrorPositions) {
    EXPECT_EQ(pos_of("(u/v, u)"), 2u);       // the '/'
    EXPECT_EQ(pos_of("(u + , v)"), 5u);      // the ','
    EXPECT_EQ(pos_of("(u, v"), 5u);          // end of input
    EXPECT_EQ(pos_of("(u, w)"), 4u);         // unknown identifier
    EXPECT_EQ(pos_of("(u, exp(v))"), 4u);    // transcendental
    EXPECT_EQ(pos_of("(u, v/(u-1))"), 5u);   // division by a variable
}

TEST(Parse, DegreeGuard) {
    EXPECT_NO_THROW(to_polynomial(*parse_expr("(u+v)^12")));
    EXPECT_THROW(to_polynomial(*parse_expr("(u+v)^13")), DslError);
    EXPECT_THROW(to_polynomial(*parse_expr("u^7*v^6")), DslError);
    EXPECT_NO_THROW(to_polynomial(*parse_expr("(u-u+2)^20")));
}

TEST(Differentiate, ExampleJacobianAndHessian) {
    FluxModel m = load_flux("example61");
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> U(-0.7, 0.7);
    for (int i = 0; i < 100; ++i) {
        const double u = U(rng), v = U(rng);
        auto j = eval_expr(m, {u, v});
        const Mat2 ref = example_jacobian(u, v);
        EXPECT_LE(max_abs(j.Df - ref), 1e-14);
        EXPECT_EQ(j.D2f.comp[0].a, 0.0);
        EXPECT_EQ(j.D2f.comp[0].b, 0.5);
        EXPECT_EQ(j.D2f.comp[0].c, 0.5);
        EXPECT_EQ(j.D2f.comp[0].d, 0.0);
        EXPECT_EQ(max_abs(j.D2f.comp[1] - Mat2{0, 0, 0, -1}), 0.0);
    }
}

TEST(Differentiate, ConstantAndPowerRule) {
    FluxModel c = differentiate(parse_flux("(3, 1/2)"));
    auto j = c.jet({0.1, 0.2});
    EXPECT_EQ(max_abs(j.Df), 0.0);
    EXPECT_EQ(max_abs(j.D2f.comp[0]) + max_abs(j.D2f.comp[1]), 0.0);
    FluxModel sq = differentiate(parse_flux("(u^2, v)"));
    EXPECT_EQ(sq.jet({0.3, 0.1}).D2f.comp[0].a, 2.0);
    const auto& sym = sq.symbolic();
    EXPECT_TRUE(sym.d2f[0][0][0] == Polynomial::constant(Rational(2)));
}

TEST(Differentiate, HessianSymmetryExact) {
    FluxModel m = differentiate(parse_flux("(u^3*v - 2*u*v^2 + v^4/3, u^2*v^2 - u)"));
    const auto& s = m.symbolic();
    for (int k = 0; k < 2; ++k) EXPECT_TRUE(s.d2f[k][0][1] == s.d2f[k][1][0]);
}

TEST(EvalExpr, ExampleValues) {
    FluxModel m = load_flux("example61");
    auto a = eval_expr(m, {0, 0}).f;
    EXPECT_EQ(a.x, 0.0);
    EXPECT_EQ(a.y, 0.0);
    auto b = eval_expr(m, {0, 1}).f;
    EXPECT_EQ(b.x, 1.0);
    EXPECT_EQ(b.y, -0.5);
    auto c = eval_expr(m, {1, 0}).f;
    EXPECT_EQ(c.x, 0.0);
    EXPECT_EQ(c.y, 1.0);
}

TEST(EvalExpr, DomainExceeded) {
    FluxModel m = load_flux("example61", 0.5);
    EXPECT_THROW(m.jet({0.4, 0.4}), DomainError);
    EXPECT_NO_THROW(m.jet({0.3, 0.3}));
}

// property: compiled partials agree with central differences of the compiled flux
TEST(Property, DerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(0);
    std::uniform_int_distribution<int> pick(-3, 3);
    std::uniform_real_distribution<double> U(-0.6, 0.6);
    const char* texts[] = {"(u*v/2 + v, u - v^2/2)", "(u^3 - v*u + 2*v^2, v^3/3 + u*v^2 - u)",
                           "((u+v)^4/7 - u, u^2*v - 3*v)", "(0.5*u^5 - v^5, u*v)"};
    for (const char* t : texts) {
        FluxModel m = differentiate(parse_flux(t));
        for (int i = 0; i < 100; ++i) {
            const Vec2 x{U(rng), U(rng)};
            const double h = 1e-5;
            auto j = m.jet(x);
            for (int a = 0; a < 2; ++a) {
                Vec2 e{};
                e[a] = h;
                const Vec2 fd = (m.flux(x + e) - m.flux(x - e)) / (2 * h);
                const Vec2 ja{j.Df(0, a), j.Df(1, a)};
                EXPECT_LE(max_abs(fd - ja), 1e-7 * (1 + norm(j.f))) << t;
                const Mat2 Jp = m.jacobian(x + e), Jm = m.jacobian(x - e);
                for (int k = 0; k < 2; ++k)
                    for (int b = 0; b < 2; ++b) {
                        const double fd2 = (Jp(k, b) - Jm(k, b)) / (2 * h);
                        EXPECT_LE(std::fabs(fd2 - j.D2f.comp[k](b, a)), 1e-7 * (1 + norm(j.f))) << t;
                    }
            }
        }
    }
    (void)pick;
}

// property: print then parse gives the same tree
TEST(Property, RoundTrip) {
    const char* texts[] = {"(u*v/2 + v, u - v^2/2)", "(-u^2 - -v, (u - v) - (u - (v - 1)))",
                           "(2*(u*v)*3, u/2/3)",   "((-u)^3 + 0.125*v, -(u*v)^2)",
                           "(1 - (2 - 3), u*(v*u))", "(((u)), 10.5/2.25)"};
    for (const char* t : texts) {
        FluxExpr a = parse_flux(t);
        const std::string printed = to_string(a);
        FluxExpr b = parse_flux(printed);
        EXPECT_TRUE(same_tree(a, b)) << t << " -> " << printed;
        EXPECT_EQ(to_string(b), printed);
    }
    // random trees
    std::mt19937_64 rng(0);
    std::function<std::string(int)> gen = [&](int depth) -> std::string {
        std::uniform_int_distribution<int> op(0, depth > 3 ? 2 : 8);
        switch (op(rng)) {
            case 0: return "u";
            case 1: return "v";
            case 2: return std::to_string(rng() % 7);
            case 3: return "(" + gen(depth + 1) + " + " + gen(depth + 1) + ")";
            case 4: return "(" + gen(depth + 1) + " - " + gen(depth + 1) + ")";
            case 5: return "(" + gen(depth + 1) + " * " + gen(depth + 1) + ")";
            case 6: return "-" + gen(depth + 1);
            case 7: return "(" + gen(depth + 1) + ")^2";
            default: return "(" + gen(depth + 1) + " / 4)";
        }
    };
    for (int i = 0; i < 200; ++i) {
        const std::string t = "(" + gen(0) + ", " + gen(0) + ")";
        FluxExpr a = parse_flux(t);
        FluxExpr b = parse_flux(to_string(a));
        EXPECT_TRUE(same_tree(a, b)) << t;
    }
}

TEST(LoadFlux, BareForm) {
    FluxModel m = load_flux("v, u");
    EXPECT_EQ(m.jacobian({0, 0}).b, 1.0);
    EXPECT_THROW(load_flux("u/v, u"), DslError);
}
