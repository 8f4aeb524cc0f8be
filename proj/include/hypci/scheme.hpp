#pragma once
// Iteration state, subsolution initialization and one step u_{n+1} = u_n^moll + v1 + v2.

#include <array>
#include <cmath>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "hypci/corrector.hpp"
#include "hypci/flux_core.hpp"
#include "hypci/flux_dsl.hpp"
#include "hypci/grid.hpp"
#include "hypci/localize.hpp"
#include "hypci/residual.hpp"
#include "hypci/schedule.hpp"

namespace hypci::scheme {

using grid::ScalarField;
using grid::SpaceTimeGrid;
using grid::VecField;

class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IterationState {
    int n = 0;
    VecField u;
    std::array<ScalarField, 2> E;  // indexed by flux::Family
    ParamSchedule sched;
    flux::StructureConstants sc;
    PhaseFn phase;
    std::shared_ptr<const dsl::FluxModel> flux;

    const SpaceTimeGrid& grid() const { return u.grid(); }
};

// u = 0, E_- = E_+ = ratio * F_0
inline IterationState init_subsolution(const ParamSchedule& sched, const flux::StructureConstants& sc, const SpaceTimeGrid& g,
                                       std::shared_ptr<const dsl::FluxModel> f, PhaseFn phase, double ratio = 1.0) {
    g.validate();
    IterationState s;
    s.n = 0;
    s.u = VecField{ScalarField(g, 0.0), ScalarField(g, 0.0)};
    s.E = {ScalarField(g, ratio * sched.F[0]), ScalarField(g, ratio * sched.F[0])};
    s.sched = sched;
    s.sc = sc;
    s.phase = phase;
    s.flux = std::move(f);
    return s;
}

inline CutoffBank build_cutoffs(int n, const ParamSchedule& s) { return CutoffBank(s.lambda.at(static_cast<std::size_t>(n))); }

inline ScalarField amplitude(const ScalarField& E_moll, double F_n, const ParamSchedule& s) {
    const AmplitudeRule rule{s.p.beta_cut, s.p.gamma_cut, F_n};
    if (E_moll.uniform()) {
        ScalarField a(E_moll.grid(), rule.amplitude(E_moll.uniform_value()));
        a.set_valid(E_moll.valid0(), E_moll.valid1());
        return a;
    }
    ScalarField a = E_moll;
    for (double& v : a.data())
        if (!std::isnan(v)) v = rule.amplitude(v);
    return a;
}

// modes of the finest phase per x-period must sit below Nyquist, with room for its square
inline void check_resolution(const SpaceTimeGrid& g, double lam_next) {
    const double modes = 2.0 * lam_next * g.Lx / kTwoPi;
    if (modes > 0.5 * g.Nx)
        throw ResolutionError("resolution-error: 2 lambda_{n+1} needs " + std::to_string(modes) + " modes per period, Nx/2 = " +
                              std::to_string(g.Nx / 2));
}

inline VecField flux_field(const VecField& u, const dsl::FluxModel& f) {
    const auto& g = u.grid();
    if (u.uniform()) {
        const Vec2 v = f.flux({u[0].uniform_value(), u[1].uniform_value()});
        VecField out{ScalarField(g, v.x), ScalarField(g, v.y)};
        for (int c = 0; c < 2; ++c) out[c].set_valid(u[c].valid0(), u[c].valid1());
        return out;
    }
    VecField out{u[0].materialized(), u[1].materialized()};
    const int lo = std::max(u[0].first_valid_row(), u[1].first_valid_row());
    const int hi = std::min(u[0].last_valid_row(), u[1].last_valid_row());
    for (int n = lo; n <= hi; ++n)
        for (int i = 0; i < g.Nx; ++i) {
            const Vec2 v = f.flux({u[0].at(n, i), u[1].at(n, i)});
            out[0].ref(n, i) = v.x;
            out[1].ref(n, i) = v.y;
        }
    return out;
}

struct StepOptions {
    bool keep_correctors = false;
    int enforce = -1;  // -1: follow the schedule mode (strict enforces)
};

struct StepResult {
    IterationState next;
    residual::RemainderLedger ledger;
    residual::CaseReport cases;
    double diff_max = 0;  // max |u_{n+1} - u_n^moll|
    double cstar = 0;     // diff_max / sqrt(F_n)
    bool has_correctors = false;
    VecField u_moll, v1, v2;
    std::array<ScalarField, 2> a, s, w;

    nlohmann::json to_json() const {
        return {{"level", ledger.level}, {"ledger", ledger.to_json()}, {"cases", cases.to_json()}, {"diff_max", diff_max}, {"Cstar_measured", cstar}};
    }
};

namespace detail {

inline ScalarField nan_field(const SpaceTimeGrid& g, double v0, double v1) {
    ScalarField f = ScalarField::zeros(g);
    f.set_valid(v0, v1);
    std::fill(f.data().begin(), f.data().end(), std::numeric_limits<double>::quiet_NaN());
    return f;
}

}  // namespace detail

inline StepResult step(const IterationState& st, const StepOptions& opt = {}) {
    const auto& sched = st.sched;
    const int n = st.n;
    const auto un = static_cast<std::size_t>(n);
    if (n + 1 >= sched.levels()) throw ScheduleError("schedule has no entry for level " + std::to_string(n + 1));
    const auto& g = st.grid();
    const auto& f = *st.flux;
    const auto& sc = st.sc;
    check_resolution(g, sched.lambda[un + 1]);

    const auto moll = grid::Mollifier::build(g, sched.delta[un]);
    const VecField ub = grid::mollify(st.u, moll);
    const std::array<ScalarField, 2> Eb{grid::mollify(st.E[0], moll), grid::mollify(st.E[1], moll)};
    const VecField fb = grid::mollify(flux_field(st.u, f), moll);
    std::array<ScalarField, 2> ut, ux, Et, Ex;
    for (int c = 0; c < 2; ++c) {
        ut[static_cast<std::size_t>(c)] = grid::deriv_t(ub[c]);
        ux[static_cast<std::size_t>(c)] = grid::deriv_x(ub[c]);
        Et[static_cast<std::size_t>(c)] = grid::deriv_t(Eb[static_cast<std::size_t>(c)]);
        Ex[static_cast<std::size_t>(c)] = grid::deriv_x(Eb[static_cast<std::size_t>(c)]);
    }

    const LevelContext ctx = make_level(f, sc, sched, n, st.phase);
    const double v0 = ub[0].valid0(), v1 = ub[0].valid1();
    StepResult res;
    IterationState& nx = res.next;
    nx.n = n + 1;
    nx.sched = sched;
    nx.sc = sc;
    nx.phase = st.phase;
    nx.flux = st.flux;
    nx.u = VecField{detail::nan_field(g, v0, v1), detail::nan_field(g, v0, v1)};
    nx.E = {detail::nan_field(g, v0, v1), detail::nan_field(g, v0, v1)};
    res.has_correctors = opt.keep_correctors;
    if (opt.keep_correctors) {
        res.u_moll = ub;
        res.v1 = VecField{detail::nan_field(g, v0, v1), detail::nan_field(g, v0, v1)};
        res.v2 = res.v1;
        for (int k = 0; k < 2; ++k) {
            res.a[static_cast<std::size_t>(k)] = detail::nan_field(g, v0, v1);
            res.s[static_cast<std::size_t>(k)] = detail::nan_field(g, v0, v1);
            res.w[static_cast<std::size_t>(k)] = detail::nan_field(g, v0, v1);
        }
    }

    const double Fn = sched.F[un], Fnext = sched.F[un + 1];
    auto& cases = res.cases;
    cases.strict = sched.p.mode == Mode::Strict;
    cases.band_lo = sched.p.c_q * Fnext;
    cases.band_hi = Fnext;
    cases.Emin = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    cases.Emax = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    residual::LedgerAccumulator acc;

    const int lo = nx.u[0].first_valid_row(), hi = nx.u[0].last_valid_row();
    for (int r = lo; r <= hi; ++r) {
        const double t = g.t(r);
        for (int i = 0; i < g.Nx; ++i) {
            SlowPoint sp;
            sp.u = {ub[0].at(r, i), ub[1].at(r, i)};
            sp.ut = {ut[0].at(r, i), ut[1].at(r, i)};
            sp.ux = {ux[0].at(r, i), ux[1].at(r, i)};
            for (std::size_t k = 0; k < 2; ++k) {
                sp.E[k] = Eb[k].at(r, i);
                sp.Et[k] = Et[k].at(r, i);
                sp.Ex[k] = Ex[k].at(r, i);
            }
            const PointTerms p = evaluate_point(ctx, sp, t, g.x(i));
            const Vec2 comm = Vec2{fb[0].at(r, i), fb[1].at(r, i)} - f.flux(sp.u);
            const auto w = residual::cramer_project(sc, p.W + comm);
            const Vec2 unew = sp.u + p.v1 + p.v2;
            nx.u[0].ref(r, i) = unew.x;
            nx.u[1].ref(r, i) = unew.y;
            res.diff_max = std::fmax(res.diff_max, max_abs(p.v1 + p.v2));
            for (std::size_t k = 0; k < 2; ++k) {
                const double e = residual::update_E(sp.E[k], p.a[k], p.s[k], w[k]);
                nx.E[k].ref(r, i) = e;
                cases.Emin[k] = std::fmin(cases.Emin[k], e);
                cases.Emax[k] = std::fmax(cases.Emax[k], e);
                const int cs = residual::case_of(sp.E[k] / Fn, sched.p.beta_cut, sched.p.gamma_cut);
                ++cases.counts[static_cast<std::size_t>(cs)];
                if (cs == 2) {
                    cases.c2_in[k] += sp.E[k];
                    cases.c2_out[k] += e;
                }
                if (!(e > 0)) ++cases.nonpositive;
                if (e < cases.band_lo) ++cases.below_band;
                if (e > cases.band_hi) ++cases.above_band;
            }
            acc.add(p, sp, comm, w);
            if (opt.keep_correctors) {
                for (int c = 0; c < 2; ++c) {
                    res.v1[c].ref(r, i) = p.v1[c];
                    res.v2[c].ref(r, i) = p.v2[c];
                }
                for (std::size_t k = 0; k < 2; ++k) {
                    res.a[k].ref(r, i) = p.a[k];
                    res.s[k].ref(r, i) = p.s[k];
                    res.w[k].ref(r, i) = w[k];
                }
            }
        }
    }
    res.cstar = res.diff_max / std::sqrt(Fn);
    res.ledger = acc.finish(n, sched.lambda[un], sched.lambda[un + 1], Fn, sched.sum_sqrtF(n), sched.p.C0);

    const bool enforce = opt.enforce < 0 ? sched.p.mode == Mode::Strict : opt.enforce > 0;
    if (enforce) {
        if (!cases.positive())
            throw residual::PositivityViolation("positivity-violation: " + std::to_string(cases.nonpositive) + " points with E <= 0");
        if (!cases.in_band())
            throw residual::BandViolation("band-violation: E in [" + std::to_string(std::fmin(cases.Emin[0], cases.Emin[1])) + ", " +
                                          std::to_string(std::fmax(cases.Emax[0], cases.Emax[1])) + "], band [" +
                                          std::to_string(cases.band_lo) + ", " + std::to_string(cases.band_hi) + "]");
    }
    return res;
}

// C0 := 2 max|w_1| / F_0^{3/2} from a constant-state zero-phase step at provisional C0 = 1.
struct C0Calibration {
    double C0 = 0, ratio = 0, F_provisional = 0, w_max = 0;
    nlohmann::json to_json() const { return {{"C0", C0}, {"ratio", ratio}, {"F_provisional", F_provisional}, {"w_max", w_max}}; }
};

inline C0Calibration calibrate_C0(std::shared_ptr<const dsl::FluxModel> f, const flux::StructureConstants& sc, ScheduleParams p,
                                  int Nx = 64) {
    p.C0 = 1.0;
    p.levels = std::max(p.levels, 2);
    const ParamSchedule s = build_schedule(p);
    SpaceTimeGrid g;
    g.Nx = Nx;
    g.Lx = s.reduced_period();
    g.t0 = 0.0;
    g.t1 = g.Lx;
    g.Nt = 9;
    IterationState st = init_subsolution(s, sc, g, std::move(f), PhaseFn::zero());
    StepOptions opt;
    opt.enforce = 0;
    const StepResult r = step(st, opt);
    C0Calibration c;
    c.F_provisional = s.F[0];
    c.w_max = r.ledger.w_max();
    c.ratio = c.w_max / std::pow(s.F[0], 1.5);
    c.C0 = 2.0 * c.ratio;
    return c;
}

}  // namespace hypci::scheme
