#pragma once
// Pointwise evaluation of one iteration: correctors, ledger pieces and the flux
// defect W, from the slow state and its first derivatives at (t, x).

#include <array>
#include <cmath>

#include "hypci/flux_core.hpp"
#include "hypci/flux_dsl.hpp"
#include "hypci/linalg.hpp"
#include "hypci/localize.hpp"
#include "hypci/schedule.hpp"

namespace hypci::scheme {

using flux::Minus;
using flux::Plus;

struct SlowPoint {
    Vec2 u, ut, ux;
    std::array<double, 2> E{}, Et{}, Ex{};
};

struct LevelContext {
    const dsl::FluxModel* flux = nullptr;
    const flux::StructureConstants* sc = nullptr;
    int level = 0;
    double lam_n = 1.0, lam_next = 1.0;
    AmplitudeRule amp;
    PhaseFn phase;
    CutoffBank bank;
};

inline LevelContext make_level(const dsl::FluxModel& f, const flux::StructureConstants& sc, const ParamSchedule& s, int n,
                               PhaseFn phase) {
    if (n < 0 || n + 1 >= s.levels()) throw ScheduleError("level " + std::to_string(n) + " has no successor frequency");
    LevelContext c;
    c.flux = &f;
    c.sc = &sc;
    c.level = n;
    c.lam_n = s.lambda[static_cast<std::size_t>(n)];
    c.lam_next = s.lambda[static_cast<std::size_t>(n) + 1];
    c.amp = AmplitudeRule{s.p.beta_cut, s.p.gamma_cut, s.F[static_cast<std::size_t>(n)]};
    c.phase = phase;
    c.bank = CutoffBank(c.lam_n);
    return c;
}

struct PointTerms {
    Vec2 v1, v2;
    std::array<Vec2, 2> v1k{}, v2kk{};
    Vec2 v2x;
    Vec2 V;  // sum_k a_k sum_j phi_kj cos(theta_kj) r_k(0)
    std::array<double, 2> a{}, s{}, a_t{}, a_x{};
    std::array<Vec2, 2> R1{}, R2{};
    Vec2 R3, R4, R5, Err1, Err2, Err3, Rs;
    Vec2 quad_mean;  // sum_k a_k^2 (1 + s_k) b_k / 4
    Vec2 W;          // W = sum_k w_k b_k before the mollification commutator
};

namespace detail {

struct FamilySlow {
    double Lam = 0, Lt = 0, Lx = 0;
    Vec2 r, rt, rx;
    double a = 0, at = 0, ax = 0;
    ActiveSet act;
    std::array<double, 3> theta{}, cth{}, sth{}, speed{};
};

// d(Df) along direction w: row c is (D2f_c w)^T
inline Mat2 jac_dir(const Hess2& H, const Vec2& w) {
    Mat2 m;
    for (int c = 0; c < 2; ++c) {
        const Vec2 row = H.comp[c] * w;
        m.at(c, 0) = row.x;
        m.at(c, 1) = row.y;
    }
    return m;
}

// derivatives of lambda_k and unit r_k along a state direction, given dJ
inline void frame_dir(const flux::EigenFrame& fr, const Mat2& dJ, int k, double& dlam, Vec2& dr) {
    const int o = flux::other(k);
    const Vec2 Jr = dJ * fr.r[k];
    dlam = dot(fr.l[k], Jr);
    const double co = dot(fr.l[o], Jr) / (fr.lambda[k] - fr.lambda[o]);
    dr = co * (fr.r[o] - dot(fr.r[k], fr.r[o]) * fr.r[k]);
}

}  // namespace detail

inline PointTerms evaluate_point(const LevelContext& ctx, const SlowPoint& sp, double t, double x) {
    const auto& sc = *ctx.sc;
    const dsl::FluxJet jet = ctx.flux->jet(sp.u);
    const flux::EigenFrame fr = flux::eigen_frame(jet.Df);
    const Mat2 Jt = detail::jac_dir(jet.D2f, sp.ut), Jx = detail::jac_dir(jet.D2f, sp.ux);
    const double lp = ctx.lam_next;
    const double P = ctx.phase.value(t), Pp = ctx.phase.deriv(t);
    const Mat2 I = Mat2::identity();

    PointTerms out;
    std::array<detail::FamilySlow, 2> fam;
    for (int k = 0; k < 2; ++k) {
        auto& F = fam[static_cast<std::size_t>(k)];
        F.Lam = fr.lambda[k];
        F.r = fr.r[k];
        detail::frame_dir(fr, Jt, k, F.Lt, F.rt);
        detail::frame_dir(fr, Jx, k, F.Lx, F.rx);
        const double Ek = sp.E[static_cast<std::size_t>(k)];
        F.a = ctx.amp.amplitude(Ek);
        const double da = ctx.amp.amplitude_deriv(Ek);
        F.at = da * sp.Et[static_cast<std::size_t>(k)];
        F.ax = da * sp.Ex[static_cast<std::size_t>(k)];
        F.act = ctx.bank.eval(F.Lam);
        out.a[static_cast<std::size_t>(k)] = F.a;
        out.a_t[static_cast<std::size_t>(k)] = F.at;
        out.a_x[static_cast<std::size_t>(k)] = F.ax;
        for (int m = 0; m < F.act.count; ++m) {
            const auto um = static_cast<std::size_t>(m);
            F.speed[um] = ctx.bank.speed(F.act.e[um].j);
            // reduce mod 2 pi, then add the time phase
            F.theta[um] = std::remainder(lp * x - lp * F.speed[um] * t, kTwoPi) + P;
            F.cth[um] = std::cos(F.theta[um]);
            F.sth[um] = std::sin(F.theta[um]);
        }
    }

    // first corrector and its transport remainders
    for (int k = 0; k < 2; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const auto& F = fam[uk];
        Vec2 v1k, R1k;
        double Ck = 0;
        if (F.a != 0.0) {
            for (int m = 0; m < F.act.count; ++m) {
                const auto um = static_cast<std::size_t>(m);
                const auto& e = F.act.e[um];
                const double c = e.phi * F.a;
                const double ct = e.dphi * F.Lt * F.a + e.phi * F.at;
                const double cx = e.dphi * F.Lx * F.a + e.phi * F.ax;
                const Vec2 dxcr = cx * F.r + c * F.rx;
                const Vec2 Tcr = (ct + F.Lam * cx) * F.r + c * (F.rt + F.Lam * F.rx);
                v1k += (c * F.cth[um]) * F.r + (F.sth[um] / lp) * dxcr;
                R1k += (F.sth[um] / lp) * Tcr + (c * F.cth[um] * (F.Lam - F.speed[um] + Pp / lp)) * F.r;
                Ck += c * F.cth[um];
            }
        }
        out.v1k[uk] = v1k;
        out.R1[uk] = R1k;
        out.R2[uk] = (jet.Df - F.Lam * I) * v1k;
        out.v1 += v1k;
        out.V += Ck * sc.frame0.r[k];
    }

    // second corrector, self interactions
    Vec2 R4, R5, Rs;
    std::array<double, 2> Sfast{};
    for (int k = 0; k < 2; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const auto& F = fam[uk];
        if (F.a == 0.0) continue;
        const double a2 = F.a * F.a;
        const double a2t = 2 * F.a * F.at, a2x = 2 * F.a * F.ax;
        const double lam0 = sc.frame0.lambda[k];
        const Vec2 Bk = sc.B[uk], bk = sc.b[uk], btk = sc.btilde[uk];
        const Vec2 resB = (sc.Df0 - lam0 * I) * bk;
        Vec2 v2k;
        double sumsq = 0;
        for (int i = 0; i < F.act.count; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const auto& ei = F.act.e[ui];
            sumsq += ei.phi * ei.phi;
            for (int j = 0; j < F.act.count; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                const auto& ej = F.act.e[uj];
                const double pp = ei.phi * ej.phi;
                const double q = a2 * pp;
                const double dpp_t = (ei.dphi * ej.phi + ei.phi * ej.dphi) * F.Lt;
                const double dpp_x = (ei.dphi * ej.phi + ei.phi * ej.dphi) * F.Lx;
                const double qt = a2t * pp + a2 * dpp_t, qx = a2x * pp + a2 * dpp_x;
                const double Th = F.theta[ui] + F.theta[uj];
                const double sT = std::sin(Th), cT = std::cos(Th);
                const double g = q / (8 * lp), gt = qt / (8 * lp), gx = qx / (8 * lp);
                const double Tg = gt + F.Lam * gx;
                const double Th_rel = lp * (2 * F.Lam - F.speed[ui] - F.speed[uj]) + 2 * Pp;
                v2k += (gx * sT + 2 * lp * g * cT) * Bk;
                R4 -= (Tg * sT + g * cT * Th_rel) * Bk;
                R5 -= (gx * sT) * btk;
                Rs += (0.25 * q * cT) * (bk - btk);
                if (i != j) {
                    Sfast[uk] += pp * cT;
                    const double dlt = F.speed[uj] - F.speed[ui];
                    const double om = lp * dlt * t, so = std::sin(om);
                    const double g3t = qt / (4 * lp * dlt), g3x = qx / (4 * lp * dlt);
                    v2k -= (g3x * so) * bk;
                    R4 += ((g3t + F.Lam * g3x) * so) * bk;
                    R5 -= (g3x * so) * resB;
                }
            }
        }
        Rs += (0.25 * a2 * (sumsq - 1)) * bk;
        out.v2kk[uk] = v2k;
    }
    for (int k = 0; k < 2; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const auto uo = static_cast<std::size_t>(flux::other(k));
        out.s[uk] = sc.alpha[uk] * Sfast[uk] + sc.beta[uo] * Sfast[uo];
        const double a2 = out.a[uk] * out.a[uk];
        Rs -= (0.25 * a2 * out.s[uk]) * sc.b[uk];
        out.quad_mean += (0.25 * a2 * (1 + out.s[uk])) * sc.b[uk];
    }

    // second corrector, cross interactions
    const auto& Fp = fam[Plus];
    const auto& Fm = fam[Minus];
    Vec2 v2x;
    if (Fp.a != 0.0 && Fm.a != 0.0) {
        const double mu = 0.5 * (Fp.Lam + Fm.Lam);
        const double mu0 = 0.5 * (sc.frame0.lambda[Plus] + sc.frame0.lambda[Minus]);
        const double aa = Fp.a * Fm.a;
        const double aat = Fp.at * Fm.a + Fp.a * Fm.at, aax = Fp.ax * Fm.a + Fp.a * Fm.ax;
        const Vec2 resD = (sc.Df0 - mu0 * I) * sc.d;
        for (int i = 0; i < Fp.act.count; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const auto& ei = Fp.act.e[ui];
            for (int j = 0; j < Fm.act.count; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                const auto& ej = Fm.act.e[uj];
                const double pp = ei.phi * ej.phi;
                const double Th = Fp.theta[ui] + Fm.theta[uj];
                if (ei.j == ej.j) {
                    Rs += (0.5 * aa * pp * (std::cos(Th) + 1)) * sc.d;
                    continue;
                }
                const double q = aa * pp;
                const double qt = aat * pp + aa * (ei.dphi * Fp.Lt * ej.phi + ei.phi * ej.dphi * Fm.Lt);
                const double qx = aax * pp + aa * (ei.dphi * Fp.Lx * ej.phi + ei.phi * ej.dphi * Fm.Lx);
                const double sT = std::sin(Th), cT = std::cos(Th);
                const double g = q / (4 * lp), gt = qt / (4 * lp), gx = qx / (4 * lp);
                const double Th_rel = lp * (2 * mu - Fp.speed[ui] - Fm.speed[uj]) + 2 * Pp;
                v2x -= (gx * sT + 2 * lp * g * cT) * sc.Dvec;
                R4 += ((gt + mu * gx) * sT + g * cT * Th_rel) * sc.Dvec;
                R5 -= (gx * sT) * sc.d;
                const double dlt = Fm.speed[uj] - Fp.speed[ui];
                const double om = lp * dlt * t, so = std::sin(om);
                const double g3t = qt / (2 * lp * dlt), g3x = qx / (2 * lp * dlt);
                v2x -= (g3x * so) * sc.d;
                R4 += ((g3t + mu * g3x) * so) * sc.d;
                R5 -= (g3x * so) * resD;
            }
        }
        out.Err3 += ((jet.Df - mu * I) - (sc.Df0 - mu0 * I)) * v2x;
    }
    out.v2x = v2x;
    for (int k = 0; k < 2; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        out.Err3 += ((jet.Df - fam[uk].Lam * I) - (sc.Df0 - sc.frame0.lambda[k] * I)) * out.v2kk[uk];
    }
    out.v2 = out.v2kk[0] + out.v2kk[1] + v2x;

    const Vec2 v = out.v1 + out.v2;
    const Vec2 Hvv = jet.D2f.apply(v, v), Hv1 = jet.D2f.apply(out.v1, out.v1);
    out.Err1 = ctx.flux->flux(sp.u + v) - jet.f - jet.Df * v - 0.5 * Hvv;
    out.Err2 = 0.5 * (Hvv - Hv1);
    out.R3 = 0.5 * Hv1 - 0.5 * sc.D2f0.apply(out.V, out.V);
    out.R4 = R4;
    out.R5 = R5;
    out.Rs = Rs;
    out.W = -(out.R1[0] + out.R1[1] + out.R2[0] + out.R2[1] + out.R3 - out.R4 + out.R5 + out.Err1 + out.Err2 + out.Err3 + out.Rs);
    return out;
}

// W + commutator = w_minus b_minus + w_plus b_plus
inline std::array<double, 2> cramer_project(const flux::StructureConstants& sc, const Vec2& X) {
    const double dt = sc.det_b;
    std::array<double, 2> w{};
    w[Plus] = det(sc.b[Minus], X) / dt;
    w[Minus] = det(X, sc.b[Plus]) / dt;
    return w;
}

}  // namespace hypci::scheme
