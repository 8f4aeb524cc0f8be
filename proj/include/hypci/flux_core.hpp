#pragma once
// Pointwise geometry of a 2x2 flux: jets, eigenframes, integral-curve
// curvatures and the structure constants at the origin.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "flux_dsl.hpp"
#include "linalg.hpp"

namespace hypci::flux {

using dsl::DomainError;
using dsl::FluxJet;
using dsl::FluxModel;

// family index: 0 = minus (slow), 1 = plus (fast)
enum Family : int { Minus = 0, Plus = 1 };
constexpr int other(int k) { return 1 - k; }
constexpr double family_sign(int k) { return k == Plus ? 1.0 : -1.0; }

class NotStrictlyHyperbolic : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDiscriminantTol = 1e-12;

inline FluxJet eval_jet(const FluxModel& m, const Vec2& u) { return m.jet(u); }

struct EigenFrame {
    std::array<double, 2> lambda{};  // lambda[Minus] < lambda[Plus]
    std::array<Vec2, 2> r{};         // unit right eigenvectors
    std::array<Vec2, 2> l{};         // duals: l[i].r[j] = delta_ij
};

// Second component positive; first component positive when the second is zero.
inline Vec2 orient(Vec2 v) {
    if (v.y < 0.0 || (v.y == 0.0 && v.x < 0.0)) return -v;
    return v;
}

inline EigenFrame eigen_frame(const Mat2& A) {
    const double half_diff = 0.5 * (A.a - A.d);
    const double disc = 4.0 * (half_diff * half_diff + A.b * A.c);  // (a-d)^2 + 4bc
    if (!(disc > kDiscriminantTol))
        throw NotStrictlyHyperbolic("not-strictly-hyperbolic: discriminant " + std::to_string(disc));
    const double root = std::sqrt(disc);
    const double mid = 0.5 * A.trace();
    EigenFrame e;
    e.lambda[Minus] = mid - 0.5 * root;
    e.lambda[Plus] = mid + 0.5 * root;
    for (int k = 0; k < 2; ++k) {
        const double lam = e.lambda[k];
        const Vec2 c1{A.b, lam - A.a};
        const Vec2 c2{lam - A.d, A.c};
        const Vec2 v = norm(c1) >= norm(c2) ? c1 : c2;
        e.r[k] = orient(v / norm(v));
    }
    const double dt = det(e.r[Minus], e.r[Plus]);
    e.l[Minus] = Vec2{e.r[Plus].y, -e.r[Plus].x} / dt;
    e.l[Plus] = Vec2{-e.r[Minus].y, e.r[Minus].x} / dt;
    return e;
}

inline EigenFrame eigen_frame(const FluxJet& j) { return eigen_frame(j.Df); }

inline EigenFrame frame_at(const FluxModel& m, const Vec2& u) { return eigen_frame(m.jacobian(u)); }

inline constexpr double kFdStep = 1e-5;

// (r_k . grad) Lambda_k and (r_k . grad) r_k at u: five-point central differences
// of exact frames along r_k.
inline double directional_speed_derivative(const FluxModel& m, const Vec2& u, int k, double h = kFdStep) {
    const Vec2 r = frame_at(m, u).r[k];
    auto lam = [&](double s) { return frame_at(m, u + s * r).lambda[k]; };
    return (8.0 * (lam(h) - lam(-h)) - (lam(2 * h) - lam(-2 * h))) / (12.0 * h);
}

inline Vec2 directional_frame_derivative(const FluxModel& m, const Vec2& u, int k, double h = kFdStep) {
    const Vec2 r = frame_at(m, u).r[k];
    auto vec = [&](double s) {
        Vec2 q = frame_at(m, u + s * r).r[k];
        return dot(q, r) < 0 ? -q : q;  // keep orientation continuous across the sign rule
    };
    return (8.0 * (vec(h) - vec(-h)) - (vec(2 * h) - vec(-2 * h))) / (12.0 * h);
}

struct CurvatureReport {
    double algebraic = 0.0;  // A (r.grad)r . l_other with finite differences
    double oracle = 0.0;     // osculating fit of the integrated integral curve
    bool agree = false;      // |algebraic - oracle| <= 1e-6
};

namespace detail {

// RK4 along du/ds = r_k(u), orientation kept continuous with the previous step.
inline std::vector<Vec2> integral_curve(const FluxModel& m, int k, double ds, int steps) {
    std::vector<Vec2> pts(static_cast<std::size_t>(steps) + 1);
    Vec2 u{0.0, 0.0};
    Vec2 ref = frame_at(m, u).r[k];
    auto field = [&](const Vec2& p) {
        Vec2 r = frame_at(m, p).r[k];
        return dot(r, ref) < 0 ? -r : r;
    };
    pts[0] = u;
    for (int i = 1; i <= steps; ++i) {
        const Vec2 k1 = field(u);
        const Vec2 k2 = field(u + 0.5 * ds * k1);
        const Vec2 k3 = field(u + 0.5 * ds * k2);
        const Vec2 k4 = field(u + ds * k3);
        u += (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ref = k4;
        pts[static_cast<std::size_t>(i)] = u;
    }
    return pts;
}

}  // namespace detail

inline CurvatureReport integral_curve_curvature(const FluxModel& m, int k) {
    const Vec2 zero{0.0, 0.0};
    const EigenFrame e = frame_at(m, zero);
    const double area = std::fabs(det(e.r[Minus], e.r[Plus]));
    CurvatureReport rep;
    rep.algebraic = area * dot(directional_frame_derivative(m, zero, k), e.l[other(k)]);

    constexpr double ds = 1e-4;
    constexpr int half = 16;
    const auto fwd = detail::integral_curve(m, k, ds, half);
    const auto bwd = detail::integral_curve(m, k, -ds, half);
    constexpr int deg = 6;
    Eigen::MatrixXd V(2 * half + 1, deg + 1);
    Eigen::MatrixXd Y(2 * half + 1, 2);
    int row = 0;
    for (int i = -half; i <= half; ++i, ++row) {
        const Vec2& p = i >= 0 ? fwd[static_cast<std::size_t>(i)] : bwd[static_cast<std::size_t>(-i)];
        const double s = i * ds;
        for (int c = 0; c <= deg; ++c) V(row, c) = std::pow(s / (half * ds), c);
        Y(row, 0) = p.x;
        Y(row, 1) = p.y;
    }
    const Eigen::MatrixXd coef = V.colPivHouseholderQr().solve(Y);
    const double scale = 1.0 / (half * ds);
    const Vec2 d1{coef(1, 0) * scale, coef(1, 1) * scale};
    const Vec2 d2{2.0 * coef(2, 0) * scale * scale, 2.0 * coef(2, 1) * scale * scale};
    const double speed = norm(d1);
    const double signed_curv = det(d1, d2) / (speed * speed * speed);
    const Vec2 normal{-d1.y / speed, d1.x / speed};
    rep.oracle = area * signed_curv * dot(normal, e.l[other(k)]);
    rep.agree = std::fabs(rep.algebraic - rep.oracle) <= 1e-6;
    return rep;
}

struct StructureConstants {
    Mat2 Df0;
    Hess2 D2f0;
    EigenFrame frame0;
    double delta_lambda = 0.0;
    double area = 0.0;
    double p0 = 0.0;
    std::array<double, 2> kappa{};   // signed, orientation per the frame sign rule
    std::array<double, 2> rate{};    // (r_k . grad Lambda_k)(0)
    std::array<Vec2, 2> b{};
    Vec2 d;
    std::array<Vec2, 2> btilde{};
    std::array<Vec2, 2> B{};
    Vec2 Dvec;
    std::array<double, 2> alpha{}, beta{};
    std::array<double, 2> lhs{};     // |rate_k|, compared against eps*|kappa_other|*delta/area
    std::array<double, 2> rhs_unit{};  // |kappa_other|*delta/area
    double eps_margin = 0.0;         // smallest eps for which the condition holds
    double det_b = 0.0;              // det(b_minus, b_plus)
};

inline constexpr double kSolveResidualTol = 1e-12;

inline StructureConstants structure_constants(const FluxModel& m) {
    StructureConstants sc;
    const Vec2 zero{0.0, 0.0};
    const FluxJet j = m.jet(zero);
    sc.Df0 = j.Df;
    sc.D2f0 = j.D2f;
    sc.frame0 = eigen_frame(j);
    const EigenFrame& e = sc.frame0;
    sc.delta_lambda = e.lambda[Plus] - e.lambda[Minus];
    sc.area = std::fabs(det(e.r[Minus], e.r[Plus]));
    sc.p0 = dot(e.r[Plus], e.r[Minus]);
    for (int k = 0; k < 2; ++k) sc.b[k] = j.D2f.apply(e.r[k], e.r[k]);
    sc.d = j.D2f.apply(e.r[Plus], e.r[Minus]);
    sc.det_b = det(sc.b[Minus], sc.b[Plus]);

    // b_k = rate_k r_k + sign_k (kappa_k delta/A) r_other holds exactly, so both
    // coefficients come from the duals without differentiating the frame.
    std::array<double, 2> c{};
    for (int k = 0; k < 2; ++k) {
        sc.rate[k] = dot(e.l[k], sc.b[k]);
        c[k] = family_sign(k) * dot(e.l[other(k)], sc.b[k]);
        sc.kappa[k] = c[k] * sc.area / sc.delta_lambda;
        sc.btilde[k] = family_sign(k) * c[k] * e.r[other(k)];
    }
    const double den = sc.rate[Plus] * sc.rate[Minus] + c[Plus] * c[Minus];
    if (std::fabs(den) <= 1e-14 * std::fmax(1.0, std::fabs(c[Plus] * c[Minus])))
        throw SingularSystem("singular-system: b_minus, b_plus are not a basis");
    for (int k = 0; k < 2; ++k) {
        sc.alpha[k] = sc.rate[k] * sc.rate[other(k)] / den;
        sc.beta[k] = -family_sign(k) * c[k] * sc.rate[k] / den;
    }

    // [lambda_k I - Df(0)] is singular on r_k; solve inside span r_other.
    for (int k = 0; k < 2; ++k) {
        const int o = other(k);
        const double gap = e.lambda[k] - e.lambda[o];
        sc.B[k] = (dot(e.l[o], sc.btilde[k]) / gap) * e.r[o];
        const Vec2 res = (e.lambda[k] * Mat2::identity() - sc.Df0) * sc.B[k] - sc.btilde[k];
        if (max_abs(res) > kSolveResidualTol * std::fmax(1.0, max_abs(sc.btilde[k])))
            throw SingularSystem("singular-system: B residual " + std::to_string(max_abs(res)));
    }
    const double mean = 0.5 * (e.lambda[Plus] + e.lambda[Minus]);
    const Mat2 Mshift = sc.Df0 - mean * Mat2::identity();
    if (!solve(Mshift, sc.d, sc.Dvec)) throw SingularSystem("singular-system: mean-speed shift");
    if (max_abs(Mshift * sc.Dvec - sc.d) > kSolveResidualTol * std::fmax(1.0, max_abs(sc.d)))
        throw SingularSystem("singular-system: D residual");

    sc.eps_margin = 0.0;
    for (int k = 0; k < 2; ++k) {
        sc.lhs[k] = std::fabs(sc.rate[k]);
        sc.rhs_unit[k] = std::fabs(sc.kappa[other(k)]) * sc.delta_lambda / sc.area;
        const double need = sc.rhs_unit[k] > 0 ? sc.lhs[k] / sc.rhs_unit[k] : std::numeric_limits<double>::infinity();
        sc.eps_margin = std::fmax(sc.eps_margin, need);
    }
    return sc;
}

struct ConditionReport {
    bool holds = false;
    std::array<double, 2> margins{};  // lhs/rhs per family; <= 1 where the inequality holds
};

// Curvature positivity is read after orienting r_other, which flips the sign of
// kappa_k; the gate is therefore kappa_k != 0.
inline ConditionReport check_condition(const StructureConstants& sc, double eps) {
    ConditionReport rep;
    bool ok = sc.kappa[Minus] != 0.0 && sc.kappa[Plus] != 0.0;
    for (int k = 0; k < 2; ++k) {
        const double rhs = eps * sc.rhs_unit[k];
        rep.margins[k] = rhs > 0 ? sc.lhs[k] / rhs : std::numeric_limits<double>::infinity();
        ok = ok && sc.lhs[k] <= rhs;
    }
    rep.holds = ok;
    return rep;
}

}  // namespace hypci::flux
