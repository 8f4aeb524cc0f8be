#pragma once
// Paired runs with phases 0 and psi, their agreement / separation reports, the
// weak-solution verifier and the closed-form checks for the example system.

#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "hypci/corrector.hpp"
#include "hypci/flux_core.hpp"
#include "hypci/flux_dsl.hpp"
#include "hypci/grid.hpp"
#include "hypci/scheme.hpp"
#include "hypci/test_functions.hpp"

namespace hypci::dephase {

using grid::ScalarField;
using grid::SpaceTimeGrid;
using grid::VecField;
using scheme::IterationState;
using scheme::PhaseFn;
using scheme::StepResult;

inline PhaseFn make_psi() { return PhaseFn::psi(); }

struct PairConfig {
    std::shared_ptr<const dsl::FluxModel> flux;
    flux::StructureConstants sc;
    scheme::ParamSchedule sched;
    SpaceTimeGrid grid;
    int n_max = 1;
    double ratio0 = 1.0;  // E_0 = ratio0 * F_0
};

struct Trajectory {
    std::vector<IterationState> states;  // states[0 .. n_max]
    std::vector<StepResult> steps;       // steps[n] produced states[n + 1]
};

struct PairRun {
    PairConfig cfg;
    double alpha0 = 0;
    std::array<Trajectory, 2> traj;  // [0]: zero phase, [1]: psi
};

inline PairRun run_pair(const PairConfig& cfg) {
    PairRun pr;
    pr.cfg = cfg;
    pr.alpha0 = cfg.ratio0 * cfg.sched.F[0];
    const std::array<PhaseFn, 2> phases{PhaseFn::zero(), make_psi()};
    scheme::StepOptions opt;
    opt.keep_correctors = true;
    for (std::size_t k = 0; k < 2; ++k) {
        auto& T = pr.traj[k];
        T.states.push_back(scheme::init_subsolution(cfg.sched, cfg.sc, cfg.grid, cfg.flux, phases[k], cfg.ratio0));
        for (int n = 0; n < cfg.n_max; ++n) {
            T.steps.push_back(scheme::step(T.states.back(), opt));
            T.states.push_back(T.steps.back().next);
        }
    }
    return pr;
}

// ---------------------------------------------------------------- agreement

struct AgreementLevel {
    int n = 0;
    double t_cut = 0;
    int rows = 0;
    double max_diff = 0;
    bool bitwise = true;
    bool pass = false;
};

struct AgreementReport {
    std::vector<AgreementLevel> levels;
    bool pass = true;
    nlohmann::json to_json() const {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& l : levels)
            a.push_back({{"n", l.n}, {"t_cut", l.t_cut}, {"rows", l.rows}, {"max_diff", l.max_diff}, {"bitwise", l.bitwise}, {"pass", l.pass}});
        return {{"levels", a}, {"pass", pass}};
    }
};

namespace detail {

inline void compare_rows(const ScalarField& a, const ScalarField& b, int lo, int hi, AgreementLevel& out) {
    const int Nx = a.grid().Nx;
    for (int n = lo; n <= hi; ++n)
        for (int i = 0; i < Nx; ++i) {
            const double x = a.at(n, i), y = b.at(n, i);
            out.max_diff = std::fmax(out.max_diff, std::fabs(x - y));
            if (std::memcmp(&x, &y, sizeof(double)) != 0) out.bitwise = false;
        }
}

}  // namespace detail

// compares the pair on rows t <= -1 - sum_{k<n} delta_k
inline AgreementReport agreement_check(const PairRun& pr, double tol = 1e-12) {
    AgreementReport rep;
    const auto& g = pr.cfg.grid;
    double dsum = 0;
    for (int n = 0; n <= pr.cfg.n_max; ++n) {
        if (n > 0) dsum += pr.cfg.sched.delta[static_cast<std::size_t>(n - 1)];
        AgreementLevel L;
        L.n = n;
        L.t_cut = -1.0 - dsum;
        const auto& A = pr.traj[0].states[static_cast<std::size_t>(n)];
        const auto& B = pr.traj[1].states[static_cast<std::size_t>(n)];
        int lo = A.u[0].first_valid_row(), hi = A.u[0].last_valid_row();
        while (hi >= lo && g.t(hi) > L.t_cut) --hi;
        L.rows = std::max(0, hi - lo + 1);
        for (int c = 0; c < 2; ++c) {
            detail::compare_rows(A.u[c], B.u[c], lo, hi, L);
            detail::compare_rows(A.E[static_cast<std::size_t>(c)], B.E[static_cast<std::size_t>(c)], lo, hi, L);
        }
        L.pass = L.rows > 0 && L.max_diff <= tol;
        rep.pass = rep.pass && L.pass;
        rep.levels.push_back(L);
    }
    return rep;
}

// ---------------------------------------------------------------- phase flip

struct PhaseFlipReport {
    double max_diff = 0;  // max |v1^(2) + v1^(1)| on |t| < 1/2
    double max_v1 = 0;
    int rows = 0;
    bool pass = false;
    nlohmann::json to_json() const { return {{"max_diff", max_diff}, {"max_v1", max_v1}, {"rows", rows}, {"pass", pass}}; }
};

inline PhaseFlipReport phase_flip_check(const PairRun& pr, double tol = 1e-12) {
    PhaseFlipReport rep;
    const auto& a = pr.traj[0].steps.at(0).v1;
    const auto& b = pr.traj[1].steps.at(0).v1;
    const auto& g = a.grid();
    for (int n = a[0].first_valid_row(); n <= a[0].last_valid_row(); ++n) {
        if (std::fabs(g.t(n)) >= 0.5) continue;
        ++rep.rows;
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < g.Nx; ++i) {
                rep.max_diff = std::fmax(rep.max_diff, std::fabs(a[c].at(n, i) + b[c].at(n, i)));
                rep.max_v1 = std::fmax(rep.max_v1, std::fabs(a[c].at(n, i)));
            }
    }
    rep.pass = rep.rows > 0 && rep.max_diff <= tol;
    return rep;
}

// ---------------------------------------------------------------- separation

inline double radius_constant(const flux::StructureConstants& sc) {
    return scheme::dephase_C(std::fmax(std::fabs(sc.frame0.lambda[flux::Plus]), std::fabs(sc.frame0.lambda[flux::Minus])));
}

struct SeparationLevel {
    int n = 0;
    double radius = 0, C = 0;
    int probes = 0;
    bool exact = false;  // probes evaluated off-grid in closed form
    std::array<double, 2> min_first{}, max_second{};  // over the disk, per r_- / r_+
    double lower = 0, upper = 0;                      // bounds for the first / second run
    double gap_origin = 0, gap_need = 0;
    double margin_first = 0, margin_second = 0, margin_gap = 0;
    bool pass = false;
};

struct SeparationReport {
    std::vector<SeparationLevel> levels;
    bool pass = false;
    nlohmann::json to_json() const {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& l : levels)
            a.push_back({{"n", l.n},
                         {"radius", l.radius},
                         {"C", l.C},
                         {"probes", l.probes},
                         {"exact", l.exact},
                         {"min_first_rminus", l.min_first[0]},
                         {"min_first_rplus", l.min_first[1]},
                         {"max_second_rminus", l.max_second[0]},
                         {"max_second_rplus", l.max_second[1]},
                         {"lower", l.lower},
                         {"upper", l.upper},
                         {"gap_origin", l.gap_origin},
                         {"gap_need", l.gap_need},
                         {"margin_first", l.margin_first},
                         {"margin_second", l.margin_second},
                         {"margin_gap", l.margin_gap},
                         {"pass", l.pass}});
        return {{"levels", a}, {"pass", pass}};
    }
};

namespace detail {

// u_n at an arbitrary point: closed form when the level below is a constant state, grid value otherwise
inline bool probe(const PairRun& pr, std::size_t run, int n, double t, double x, Vec2& out) {
    const auto& T = pr.traj[run];
    const auto& prev = T.states[static_cast<std::size_t>(n - 1)];
    const auto& g = pr.cfg.grid;
    if (prev.u.uniform() && prev.E[0].uniform() && prev.E[1].uniform()) {
        const auto ctx = scheme::make_level(*prev.flux, prev.sc, prev.sched, n - 1, prev.phase);
        scheme::SlowPoint sp;
        sp.u = {prev.u[0].uniform_value(), prev.u[1].uniform_value()};
        sp.E = {prev.E[0].uniform_value(), prev.E[1].uniform_value()};
        const auto p = scheme::evaluate_point(ctx, sp, t, x);
        out = sp.u + p.v1 + p.v2;
        return true;
    }
    const double fr = (t - g.t0) / g.dt();
    const int r = static_cast<int>(std::lround(fr));
    const double xi = std::fmod(x / g.dx(), static_cast<double>(g.Nx));
    const int i = static_cast<int>(std::lround(xi < 0 ? xi + g.Nx : xi)) % g.Nx;
    if (std::fabs(fr - r) > 1e-9 || std::fabs(xi - std::round(xi)) > 1e-9 || r < 0 || r >= g.Nt) return false;
    const auto& u = T.states[static_cast<std::size_t>(n)].u;
    out = {u[0].at(r, i), u[1].at(r, i)};
    return std::isfinite(out.x) && std::isfinite(out.y);
}

}  // namespace detail

inline SeparationReport separation_check(const PairRun& pr, int rings = 4, int spokes = 16) {
    SeparationReport rep;
    const auto& sc = pr.cfg.sc;
    const auto& s = pr.cfg.sched;
    const double C = radius_constant(sc);
    const double a0 = pr.alpha0;
    const double base = std::sqrt(a0) * (1 + sc.p0);
    double sum = 0;
    for (int n = 1; n <= pr.cfg.n_max; ++n) {
        sum += 2 * a0 * std::pow(s.p.r, n - 1) / s.p.c_q + 1 / s.lambda[static_cast<std::size_t>(n)];
        SeparationLevel L;
        L.n = n;
        L.C = C;
        L.radius = 1 / (2 * C * s.lambda[static_cast<std::size_t>(n)]);
        L.lower = base - C * sum;
        L.upper = -base + C * sum;
        L.gap_need = base;
        L.min_first = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        L.max_second = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
        for (int a = 1; a <= rings; ++a)
            for (int b = 0; b < spokes; ++b) {
                const double rr = L.radius * a / rings, ang = 2 * scheme::kPiL * b / spokes;
                pts.emplace_back(rr * std::sin(ang), rr * std::cos(ang));
            }
        for (std::size_t q = 0; q < pts.size(); ++q) {
            Vec2 u1, u2;
            if (!detail::probe(pr, 0, n, pts[q].first, pts[q].second, u1) || !detail::probe(pr, 1, n, pts[q].first, pts[q].second, u2))
                continue;
            L.exact = pr.traj[0].states[static_cast<std::size_t>(n - 1)].u.uniform();
            ++L.probes;
            for (int k = 0; k < 2; ++k) {
                const auto uk = static_cast<std::size_t>(k);
                L.min_first[uk] = std::fmin(L.min_first[uk], dot(u1, sc.frame0.r[k]));
                L.max_second[uk] = std::fmax(L.max_second[uk], dot(u2, sc.frame0.r[k]));
            }
            if (q == 0) L.gap_origin = dot(u1 - u2, sc.frame0.r[flux::Plus]);
        }
        L.margin_first = std::fmin(L.min_first[0], L.min_first[1]) - L.lower;
        L.margin_second = L.upper - std::fmax(L.max_second[0], L.max_second[1]);
        L.margin_gap = L.gap_origin - L.gap_need;
        L.pass = L.probes > 0 && L.margin_first >= 0 && L.margin_second >= 0 && L.margin_gap >= 0;
        rep.levels.push_back(L);
    }
    rep.pass = !rep.levels.empty() && rep.levels.back().pass;
    return rep;
}

// ---------------------------------------------------------------- weak solutions

struct WeakReport {
    std::vector<double> residuals;  // per tested member, max over components
    double max_residual = 0;
    int tested = 0;
    nlohmann::json to_json() const { return {{"residuals", residuals}, {"max_residual", max_residual}, {"tested", tested}}; }
};

// |int int (u phi_t + f(u) phi_x) + int u0 phi(t0, .)| for each member of the bank
inline WeakReport weak_solution_test(const VecField& u, const VecField* u0, const dsl::FluxModel& f, const weak::TestFunctionBank& bank) {
    WeakReport rep;
    const VecField F = scheme::flux_field(u, f);
    const auto& g = u.grid();
    for (const auto& phi : bank.items) {
        double worst = 0;
        for (int c = 0; c < 2; ++c) {
            double v = weak::pair(u[c].materialized(), F[c].materialized(), phi);
            if (u0) {
                const int r0 = (*u0)[c].first_valid_row();
                double s = 0;
                for (int i = 0; i < g.Nx; ++i) s += (*u0)[c].at(r0, i) * phi.value(g.t(r0), g.x(i));
                v += s * g.dx();
            }
            worst = std::fmax(worst, std::fabs(v));
        }
        rep.residuals.push_back(worst);
        rep.max_residual = std::fmax(rep.max_residual, worst);
        ++rep.tested;
    }
    return rep;
}

// ---------------------------------------------------------------- example system

struct NamedCheck {
    std::string name;
    double error = 0, tol = 0;
    bool pass = false;
};

struct ExampleReport {
    std::vector<NamedCheck> checks;
    bool pass = true;
    void add(const std::string& n, double err, double tol) {
        checks.push_back({n, err, tol, err <= tol});
        pass = pass && err <= tol;
    }
    nlohmann::json to_json() const {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& c : checks) a.push_back({{"name", c.name}, {"error", c.error}, {"tol", c.tol}, {"pass", c.pass}});
        return {{"checks", a}, {"pass", pass}};
    }
};

// speed derivative along the field's own direction, exact via the chain rule
inline double field_rate(const dsl::FluxModel& f, const Vec2& u, int k) {
    const auto jet = f.jet(u);
    const auto fr = flux::eigen_frame(jet.Df);
    double dl = 0;
    Vec2 dr;
    scheme::detail::frame_dir(fr, scheme::detail::jac_dir(jet.D2f, fr.r[k]), k, dl, dr);
    return dl;
}

// eigenvector (3v/4 +- sqrt(phi)/2, 1) of the example Jacobian
inline Vec2 unscaled_vector(const Vec2& p, int fam) {
    const double ph = 4 + 2 * p.x + 2.25 * p.y * p.y;
    return {0.75 * p.y + flux::family_sign(fam) * 0.5 * std::sqrt(ph), 1.0};
}

inline ExampleReport example_checks(const dsl::FluxModel& f, std::uint64_t seed = 0, int samples = 200, double ball = 0.1) {
    ExampleReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto disc = [](const Vec2& p) { return 4 + 2 * p.x + 2.25 * p.y * p.y; };
    double e_speed = 0, e_rate = 0, e_sym = 0, min_eig = std::numeric_limits<double>::infinity(), e_gnl = 0;
    double min_gnl = std::numeric_limits<double>::infinity(), e_vec = 0;
    for (int k = 0; k < samples; ++k) {
        Vec2 p{U(rng), U(rng)};
        if (norm(p) > 1) p = p / (norm(p) + 1e-3);
        p = ball * p;
        const double ph = disc(p);
        const auto fr = flux::frame_at(f, p);
        e_speed = std::fmax(e_speed, std::fabs(fr.lambda[flux::Plus] - (-p.y / 4 + std::sqrt(ph) / 2)));
        e_speed = std::fmax(e_speed, std::fabs(fr.lambda[flux::Minus] - (-p.y / 4 - std::sqrt(ph) / 2)));
        for (int fam = 0; fam < 2; ++fam) {
            const double sg = flux::family_sign(fam);
            const double got = field_rate(f, p, fam) * norm(unscaled_vector(p, fam));
            e_rate = std::fmax(e_rate, std::fabs(got - sg * 3 * p.y / (2 * std::sqrt(ph))));
            if (std::fabs(p.y) > 0.01) min_gnl = std::fmin(min_gnl, std::fabs(got));
        }
        for (int fam = 0; fam < 2; ++fam) {
            const Vec2 r = unscaled_vector(p, fam);
            e_vec = std::fmax(e_vec, max_abs(f.jacobian(p) * r - fr.lambda[fam] * r));
        }
        // entropy: Hessian and its compatibility with Df
        const double huu = 1, huv = p.y / 2, hvv = 1 + p.x / 2 - 0.75 * p.y * p.y;
        const double tr = huu + hvv, dt = huu * hvv - huv * huv;
        e_sym = std::fmax(e_sym, std::fabs(tr - (2 + p.x / 2 - 0.75 * p.y * p.y)) + std::fabs(dt - (1 + p.x / 2 - p.y * p.y)));
        const Mat2 Hn{huu, huv, huv, hvv};
        const Mat2 J = f.jacobian(p);
        const Mat2 S{Hn.a * J.a + Hn.b * J.c, Hn.a * J.b + Hn.b * J.d, Hn.c * J.a + Hn.d * J.c, Hn.c * J.b + Hn.d * J.d};
        e_sym = std::fmax(e_sym, std::fabs(S.b - S.c));
        min_eig = std::fmin(min_eig, 0.5 * tr - std::sqrt(0.25 * tr * tr - dt));
    }
    e_gnl = min_gnl > 0 ? 0.0 : 1.0;
    rep.add("speeds match -v/4 +- sqrt(phi)/2", e_speed, 1e-12);
    rep.add("field rate matches +-3v/(2 sqrt(phi)), eigenvector scaled to second entry 1", e_rate, 1e-12);
    rep.add("entropy Hessian trace/determinant and D2eta Df symmetric", e_sym, 1e-12);
    rep.add("scaled eigenvectors solve Df r = Lambda r", e_vec, 1e-12);
    rep.add("entropy Hessian positive definite on the ball", min_eig > 0 ? 0.0 : -min_eig, 0.0);
    rep.add("both fields genuinely nonlinear away from v = 0", e_gnl, 0.0);
    const auto fr0 = flux::frame_at(f, {0, 0});
    rep.add("spectral gap at 0 equals 2", std::fabs(fr0.lambda[flux::Plus] - fr0.lambda[flux::Minus] - 2), 1e-12);
    rep.add("field rates vanish at 0", std::fmax(std::fabs(field_rate(f, {0, 0}, 0)), std::fabs(field_rate(f, {0, 0}, 1))), 1e-12);
    const Vec2 q{0, 0.05};
    const double want = 0.15 / (2 * std::sqrt(disc(q)));
    double e05 = 0;
    for (int fam = 0; fam < 2; ++fam)
        e05 = std::fmax(e05, std::fabs(field_rate(f, q, fam) * norm(unscaled_vector(q, fam)) - flux::family_sign(fam) * want));
    rep.add("field rate at (0, 0.05), eigenvector scaled to second entry 1", e05, 1e-12);
    return rep;
}

}  // namespace hypci::dephase
