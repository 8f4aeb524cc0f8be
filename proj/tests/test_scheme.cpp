#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "hypci/scheme.hpp"
#include "random_flux.hpp"

using namespace hypci;
using namespace hypci::scheme;

namespace {

std::shared_ptr<const dsl::FluxModel> example() { return std::make_shared<const dsl::FluxModel>(dsl::load_flux("example61")); }

ParamSchedule strict_schedule(double C0 = 1.5) {
    ScheduleParams p;
    p.C0 = C0;
    return build_schedule(p);
}

}  // namespace

// ---------------------------------------------------------------- cutoffs

TEST(Cutoffs, SquaresSumToOne) {
    std::mt19937_64 rng(7);
    for (double lam : {3.0, kTwoPi * 5, kTwoPi * 1000}) {
        CutoffBank bank(lam);
        std::uniform_real_distribution<double> U(-2.0, 2.0);
        double worst = 0;
        for (int k = 0; k < 100000; ++k) {
            const auto a = bank.eval(U(rng));
            double s = 0;
            for (int m = 0; m < a.count; ++m) s += a.e[static_cast<std::size_t>(m)].phi * a.e[static_cast<std::size_t>(m)].phi;
            worst = std::fmax(worst, std::fabs(s - 1));
        }
        EXPECT_LE(worst, 1e-12) << lam;
    }
}

TEST(Cutoffs, OneAtOwnSpeedAndCompactSupport) {
    CutoffBank bank(kTwoPi * 3);
    for (long j = -20; j <= 20; ++j) {
        EXPECT_DOUBLE_EQ(bank.phi(j, bank.speed(j)), 1.0);
        EXPECT_EQ(bank.phi(j + 1, bank.speed(j)), 0.0);
        EXPECT_EQ(bank.phi(j, (j + 0.67) / bank.lambda()), 0.0);
        EXPECT_GT(bank.phi(j, (j + 0.6) / bank.lambda()), 0.0);
    }
    EXPECT_DOUBLE_EQ(localized_speed(4.0, 3), 0.75);
}

TEST(Cutoffs, AtMostTwoActiveAndSpeedsClose) {
    CutoffBank bank(17.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int k = 0; k < 20000; ++k) {
        const double L = U(rng);
        const auto a = bank.eval(L);
        ASSERT_GE(a.count, 1);
        ASSERT_LE(a.count, 2);
        for (int m = 0; m < a.count; ++m) EXPECT_LT(std::fabs(bank.speed(a.e[static_cast<std::size_t>(m)].j) - L), 2.0 / (3.0 * 17.0));
    }
}

TEST(Cutoffs, DerivativeMatchesDifferenceQuotient) {
    CutoffBank bank(9.0);
    const double h = 1e-6;
    for (double L = -1.3; L < 1.3; L += 0.0173) {
        const auto a = bank.eval(L);
        for (int m = 0; m < a.count; ++m) {
            const auto& e = a.e[static_cast<std::size_t>(m)];
            const double fd = (bank.phi(e.j, L + h) - bank.phi(e.j, L - h)) / (2 * h);
            EXPECT_NEAR(e.dphi, fd, 1e-5 * (1 + std::fabs(fd))) << L;
        }
    }
}

// ---------------------------------------------------------------- amplitude

TEST(Amplitude, ReferenceValues) {
    const double F = 2.5e-4;
    AmplitudeRule rule{0.54, 0.55, F};
    EXPECT_EQ(rule.amplitude(0.54 * F), 0.0);
    EXPECT_EQ(rule.amplitude(0.3 * F), 0.0);
    EXPECT_NEAR(rule.amplitude(F), std::sqrt(2 * F), 1e-15);
    const double a = rule.amplitude(0.55 * F);
    EXPECT_NEAR(a * a, 2 * 0.55 * F, 1e-18);
    EXPECT_EQ(rule.amplitude(-1.0), 0.0);
}

TEST(Amplitude, DerivativeMatchesDifferenceQuotient) {
    const double F = 1e-3;
    AmplitudeRule rule{0.54, 0.55, F};
    for (double s = 0.541; s < 1.2; s += 0.0031) {
        const double E = s * F, h = 1e-9 * F;
        const double fd = (rule.amplitude(E + h) - rule.amplitude(E - h)) / (2 * h);
        EXPECT_NEAR(rule.amplitude_deriv(E), fd, 1e-5 * (1 + std::fabs(fd))) << s;
    }
}

// ---------------------------------------------------------------- phase

TEST(Phase, PsiProfile) {
    const auto P = PhaseFn::psi();
    EXPECT_EQ(P.value(-2.0), 0.0);
    EXPECT_EQ(P.value(-1.0), 0.0);
    EXPECT_EQ(P.value(-0.5), kPiL);
    EXPECT_EQ(P.value(0.0), kPiL);
    EXPECT_NEAR(P.value(-0.75), 0.5 * kPiL, 1e-15);
    double prev = -1;
    for (double t = -1.0; t <= -0.5; t += 1e-3) {
        EXPECT_GE(P.value(t), prev);
        prev = P.value(t);
    }
    const double h = 1e-6;
    for (double t = -0.999; t < -0.5; t += 0.01) {
        EXPECT_NEAR(P.deriv(t), (P.value(t + h) - P.value(t - h)) / (2 * h), 1e-6);
        EXPECT_NEAR(P.deriv2(t), (P.deriv(t + h) - P.deriv(t - h)) / (2 * h), 1e-4);
    }
    EXPECT_EQ(PhaseFn::zero().value(0.3), 0.0);
    EXPECT_THROW(PhaseFn::from_string("pi"), std::invalid_argument);
}

// ---------------------------------------------------------------- schedule

TEST(Schedule, StrictSatisfiesEveryConstraint) {
    auto f = example();
    const auto sc = flux::structure_constants(*f);
    const auto s = strict_schedule();
    const auto rep = validate(s, sc.delta_lambda);
    for (const auto& c : rep.items) EXPECT_TRUE(c.ok) << c.name << " level " << c.level << ": " << c.lhs << " > " << c.rhs;
    EXPECT_TRUE(rep.all_ok);
    EXPECT_GE(s.lambda[1], std::pow(s.lambda[0], 5));
    EXPECT_EQ(s.lambda[1], kTwoPi * static_cast<double>(s.N[1]));
    EXPECT_LE(s.delta[0], 1 / (2 * dephase_C(1.0) * s.lambda[0]));
}

TEST(Schedule, RelaxedReportsItsViolations) {
    auto f = example();
    const auto sc = flux::structure_constants(*f);
    auto p = relaxed_defaults();
    p.C0 = 1.5;
    const auto s = build_schedule(p);
    ASSERT_EQ(s.levels(), 4);
    for (int n = 1; n + 1 < s.levels(); ++n) EXPECT_EQ(s.N[static_cast<std::size_t>(n) + 1], 16 * s.N[static_cast<std::size_t>(n)]);
    const auto rep = validate(s, sc.delta_lambda);
    EXPECT_FALSE(rep.all_ok);
    bool growth = false;
    for (const auto& c : rep.items)
        if (c.name == "lambda_{n+1} >= lambda_n^5" && !c.ok) growth = true;
    EXPECT_TRUE(growth);
    EXPECT_GT(s.reduced_period(), 0.0);
    EXPECT_NEAR(s.reduced_period() * static_cast<double>(s.N[1]), 1.0, 1e-15);
}

TEST(Schedule, AmplitudeWindowUpperEdge) {
    // 1/2 + e/(1-r) <= r^2 with r = 0.8 caps e at 0.028, and r^2 <= 1 - e/(c_q(1-r)) caps it at 0.01656
    ScheduleParams p;
    p.C0 = 1.5;
    p.eps_amp = 0.0165;
    EXPECT_TRUE(validate(build_schedule(p), 2.0).all_ok);
    p.eps_amp = 0.017;
    const auto rep = validate(build_schedule(p), 2.0);
    EXPECT_FALSE(rep.all_ok);
}

TEST(Schedule, BadInputs) {
    ScheduleParams p;
    p.levels = 0;
    EXPECT_THROW(build_schedule(p), ScheduleError);
    p.levels = 2;
    p.C0 = 0;
    EXPECT_THROW(build_schedule(p), ScheduleError);
    EXPECT_THROW(mode_from_string("loose"), std::invalid_argument);
}

TEST(Schedule, LevelsDecay) {
    const auto s = strict_schedule();
    EXPECT_NEAR(s.F[1] / s.F[0], 0.64, 1e-14);
    EXPECT_NEAR(s.F[0], 0.016 * 0.016 / 2.25, 1e-18);
}

// ---------------------------------------------------------------- correctors on a constant state

namespace {

struct ConstantLevel {
    std::shared_ptr<const dsl::FluxModel> f = example();
    flux::StructureConstants sc = flux::structure_constants(*f);
    ParamSchedule s = strict_schedule();
};

}  // namespace

TEST(Correctors, FirstCorrectorClosedForm) {
    ConstantLevel L;
    for (auto ph : {PhaseFn::zero(), PhaseFn::psi()}) {
        const auto ctx = make_level(*L.f, L.sc, L.s, 0, ph);
        SlowPoint sp;
        sp.E = {L.s.F[0], L.s.F[0]};
        const double a = std::sqrt(2 * L.s.F[0]);
        const double lp = L.s.lambda[1];
        double worst = 0;
        for (int q = 0; q < 500; ++q) {
            const double t = -1.2 + 0.0031 * q, x = 0.000137 * q;
            const auto p = evaluate_point(ctx, sp, t, x);
            Vec2 want;
            for (int k = 0; k < 2; ++k) {
                const double sp_k = flux::family_sign(k) * 1.0;
                want += (a * std::cos(lp * (x - sp_k * t) + ph.value(t))) * L.sc.frame0.r[k];
            }
            worst = std::fmax(worst, max_abs(p.v1 - want));
            EXPECT_EQ(p.a[0], a);
            EXPECT_EQ(p.s[0], 0.0);
            EXPECT_EQ(p.s[1], 0.0);
        }
        // phases are O(lambda_1 t) ~ 1e6 here; the comparison sees their rounding
        EXPECT_LE(worst, 1e-9 * a);
    }
}

TEST(Correctors, SecondCorrectorClosedForm) {
    ConstantLevel L;
    const auto ctx = make_level(*L.f, L.sc, L.s, 0, PhaseFn::zero());
    SlowPoint sp;
    sp.E = {L.s.F[0], 1.3 * L.s.F[0]};
    const double lp = L.s.lambda[1];
    double worst = 0, mag = 0;
    for (int q = 0; q < 300; ++q) {
        const double t = 1e-4 * q, x = 3e-6 * q;
        const auto p = evaluate_point(ctx, sp, t, x);
        std::array<double, 2> th{};
        Vec2 want;
        for (int k = 0; k < 2; ++k) {
            th[static_cast<std::size_t>(k)] = std::remainder(lp * x - lp * flux::family_sign(k) * t, kTwoPi);
            const double a = p.a[static_cast<std::size_t>(k)];
            want += (0.25 * a * a * std::cos(2 * th[static_cast<std::size_t>(k)])) * L.sc.B[static_cast<std::size_t>(k)];
        }
        want -= (0.5 * p.a[0] * p.a[1] * std::cos(th[0] + th[1])) * L.sc.Dvec;
        worst = std::fmax(worst, max_abs(p.v2 - want));
        mag = std::fmax(mag, max_abs(want));
        // every remainder vanishes on a constant state with single active cutoffs
        EXPECT_LE(max_abs(p.R1[0]) + max_abs(p.R1[1]) + max_abs(p.R2[0]) + max_abs(p.R2[1]), 1e-18);
        EXPECT_LE(max_abs(p.R4) + max_abs(p.R5) + max_abs(p.Rs), 1e-18);
    }
    EXPECT_GT(mag, 0.0);
    EXPECT_LE(worst, 1e-13 * mag);
}

TEST(Correctors, ZeroAmplitudeGivesZeroCorrectors) {
    ConstantLevel L;
    const auto ctx = make_level(*L.f, L.sc, L.s, 0, PhaseFn::psi());
    SlowPoint sp;
    sp.E = {0.5 * L.s.F[0], 0.54 * L.s.F[0]};
    for (int q = 0; q < 50; ++q) {
        const auto p = evaluate_point(ctx, sp, -0.7 + 0.01 * q, 0.01 * q);
        EXPECT_EQ(max_abs(p.v1), 0.0);
        EXPECT_EQ(max_abs(p.v2), 0.0);
        EXPECT_EQ(max_abs(p.W), 0.0);
    }
}

TEST(Correctors, OverlapTermBoundedBySyntheticCoefficient) {
    ConstantLevel L;
    auto sc = L.sc;
    sc.alpha = {0.0, 0.1};
    sc.beta = {0.0, 0.0};
    LevelContext ctx;
    ctx.flux = L.f.get();
    ctx.sc = &sc;
    ctx.lam_n = 3.5;  // lambda_n Lambda = +-3.5: two cutoffs active in each family
    ctx.lam_next = L.s.lambda[1];
    ctx.amp = AmplitudeRule{0.54, 0.55, L.s.F[0]};
    ctx.bank = CutoffBank(ctx.lam_n);
    SlowPoint sp;
    sp.E = {L.s.F[0], L.s.F[0]};
    double smax = 0;
    for (int q = 0; q < 4000; ++q) {
        const auto p = evaluate_point(ctx, sp, 1e-7 * q, 1.3e-7 * q);
        EXPECT_EQ(p.s[0], 0.0);
        smax = std::fmax(smax, std::fabs(p.s[1]));
    }
    // both orderings of the overlapping pair enter: |s| <= 0.1 * 2 phi_i phi_j <= 0.1
    EXPECT_LE(smax, 0.1 + 1e-15);
    EXPECT_GT(smax, 0.05);
    EXPECT_LE(smax, 0.1 / 0.9);
}

TEST(Correctors, FrameDirectionalDerivativeMatchesDifferences) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = testing_support::random_flux(rng);
        const Vec2 u{0.03, -0.02}, w{0.7, -0.4};
        const auto jet = f.jet(u);
        const auto fr = flux::eigen_frame(jet.Df);
        const double h = 1e-6;
        const auto fp = flux::frame_at(f, u + h * w), fm = flux::frame_at(f, u - h * w);
        for (int k = 0; k < 2; ++k) {
            double dl = 0;
            Vec2 dr;
            detail::frame_dir(fr, detail::jac_dir(jet.D2f, w), k, dl, dr);
            EXPECT_NEAR(dl, (fp.lambda[k] - fm.lambda[k]) / (2 * h), 1e-6);
            EXPECT_NEAR(max_abs(dr - (fp.r[k] - fm.r[k]) / (2 * h)), 0.0, 1e-6);
        }
    }
}

// ---------------------------------------------------------------- one step

namespace {

grid::SpaceTimeGrid small_grid(const ParamSchedule& s, int Nx = 64, int Nt = 256) {
    grid::SpaceTimeGrid g;
    g.Nx = Nx;
    g.Lx = s.reduced_period();
    g.t0 = 0;
    g.t1 = 8 * g.Lx;
    g.Nt = Nt;
    return g;
}

}  // namespace

TEST(Step, SubsolutionStartsConsistent) {
    ConstantLevel L;
    const auto st = init_subsolution(L.s, L.sc, small_grid(L.s), L.f, PhaseFn::zero());
    EXPECT_EQ(st.u[0].uniform_value(), 0.0);
    EXPECT_EQ(st.E[flux::Plus].uniform_value(), L.s.F[0]);
    const auto rep = residual::pde_residual_check(st.u, st.E, *L.f, L.sc);
    EXPECT_EQ(rep.max_norm, 0.0);
    EXPECT_EQ(amplitude(st.E[0], L.s.F[0], L.s).uniform_value(), std::sqrt(2 * L.s.F[0]));
}

TEST(Step, CaseTwoUpdateAndBand) {
    ConstantLevel L;
    const auto st = init_subsolution(L.s, L.sc, small_grid(L.s), L.f, PhaseFn::zero());
    StepOptions opt;
    opt.keep_correctors = true;
    const auto r = step(st, opt);
    EXPECT_EQ(r.next.n, 1);
    EXPECT_TRUE(r.cases.in_band());
    EXPECT_TRUE(r.cases.positive());
    EXPECT_EQ(r.cases.counts[0], 0);
    EXPECT_EQ(r.cases.counts[1], 0);
    EXPECT_GT(r.cases.counts[2], 0);
    const double F0 = L.s.F[0];
    const auto& g = st.grid();
    double wmax = 0;
    for (int n = r.next.E[0].first_valid_row(); n <= r.next.E[0].last_valid_row(); ++n)
        for (int i = 0; i < g.Nx; ++i)
            for (std::size_t k = 0; k < 2; ++k) {
                const double w = r.w[k].at(n, i);
                EXPECT_NEAR(r.next.E[k].at(n, i), 0.5 * F0 + w, 1e-15 * F0);
                wmax = std::fmax(wmax, std::fabs(w));
            }
    EXPECT_LE(wmax, L.s.p.C0 * F0 * std::sqrt(F0));
    EXPECT_NEAR(r.cstar, 2.0, 0.05);
    EXPECT_TRUE(r.ledger.all_pass());
}

TEST(Step, RejectsUnderResolvedGridAndMissingLevel) {
    ConstantLevel L;
    auto g = small_grid(L.s, 8, 16);
    g.Lx = 1.0;
    const auto st = init_subsolution(L.s, L.sc, g, L.f, PhaseFn::zero());
    EXPECT_THROW(step(st), ResolutionError);
    auto st2 = init_subsolution(L.s, L.sc, small_grid(L.s), L.f, PhaseFn::zero());
    st2.n = 1;
    EXPECT_THROW(step(st2), ScheduleError);
}

TEST(Step, DeterministicRerun) {
    ConstantLevel L;
    const auto st = init_subsolution(L.s, L.sc, small_grid(L.s, 32, 64), L.f, PhaseFn::psi());
    const auto a = step(st), b = step(st);
    for (const auto* pr : {&a.next.u[0], &a.next.E[1]}) {
        const auto& x = pr->data();
        const auto& y = (pr == &a.next.u[0] ? b.next.u[0] : b.next.E[1]).data();
        ASSERT_EQ(x.size(), y.size());
        EXPECT_EQ(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)), 0);
    }
}

TEST(Step, CalibrationIsStable) {
    auto f = example();
    const auto sc = flux::structure_constants(*f);
    const auto c = calibrate_C0(f, sc, ScheduleParams{});
    EXPECT_NEAR(c.ratio, 0.75, 0.01);
    EXPECT_NEAR(c.C0, 1.5, 0.02);
}
