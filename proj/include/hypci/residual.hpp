#pragma once
// Remainder ledger, error-level update and the independent identity check.

#include <array>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypci/corrector.hpp"
#include "hypci/flux_core.hpp"
#include "hypci/flux_dsl.hpp"
#include "hypci/grid.hpp"
#include "hypci/test_functions.hpp"

namespace hypci::residual {

using grid::ScalarField;
using grid::VecField;

class PositivityViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class BandViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class SingularBasis : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::array<double, 2> cramer_project(const flux::StructureConstants& sc, const Vec2& X) {
    if (!(std::fabs(sc.det_b) > 1e-14)) throw SingularBasis("singular-basis: det(b_minus, b_plus) = " + std::to_string(sc.det_b));
    return scheme::cramer_project(sc, X);
}

inline double update_E(double E_moll, double a, double s, double w) { return E_moll - 0.25 * (1 + s) * a * a + w; }

// magnitudes the remainder estimates are expressed in
struct LedgerInputs {
    double A = 0;   // max amplitude
    double Ga = 0;  // max |grad a|
    double G = 0;   // max |grad u_moll|
    double U = 0;   // max |u_moll|
    double lam_n = 1, lam_next = 1, F_n = 0, sum_sqrtF = 0;
};

struct LedgerEntry {
    std::string name;
    double measured = 0;
    double predicted = 0;  // 0: no estimate attached
    bool pass = true;
    double ratio() const { return predicted > 0 ? measured / predicted : std::numeric_limits<double>::quiet_NaN(); }
};

inline double predicted_bound(const std::string& name, const LedgerInputs& in) {
    const double A = in.A, Ga = in.Ga, G = in.G, U = in.U, ln = in.lam_n, lp = in.lam_next;
    const double q = ln * G / lp;
    if (name == "R1+" || name == "R1-") return A * (q + 1 / ln) + Ga / lp;
    if (name == "R2+" || name == "R2-") return A * G / lp;
    if (name == "R3") return A * A * (U * (1 + q) * (1 + q) + q * q + U * U) + Ga * Ga * U / (lp * lp);
    if (name == "R4") return A * A * (ln * ln * G / lp + 1 / ln) + ln * A * Ga / lp;
    if (name == "R5") return A * A * ln * ln * G / lp + A * Ga / lp;
    if (name == "w+" || name == "w-") return in.F_n * in.sum_sqrtF;
    return 0.0;
}

inline const std::vector<std::string>& ledger_names() {
    static const std::vector<std::string> n{"R1+", "R1-", "R2+", "R2-", "R3", "R4", "R5", "Err1", "Err2", "Err3",
                                            "Rs", "commutator", "W", "w+", "w-", "v1", "v2"};
    return n;
}

struct RemainderLedger {
    int level = 0;
    LedgerInputs inputs;
    std::vector<LedgerEntry> entries;
    double C0 = 0;  // schedule constant the w entries are checked against

    const LedgerEntry& get(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw std::out_of_range("no ledger entry " + name);
    }
    double w_max() const { return std::fmax(get("w+").measured, get("w-").measured); }
    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : entries) {
            nlohmann::json r{{"name", e.name}, {"measured", e.measured}, {"predicted", e.predicted}, {"pass", e.pass}};
            r["ratio"] = e.predicted > 0 ? nlohmann::json(e.ratio()) : nlohmann::json(nullptr);
            rows.push_back(r);
        }
        return {{"level", level},
                {"C0", C0},
                {"inputs",
                 {{"A", inputs.A}, {"Ga", inputs.Ga}, {"G", inputs.G}, {"U", inputs.U}, {"lambda_n", inputs.lam_n},
                  {"lambda_next", inputs.lam_next}, {"F_n", inputs.F_n}, {"sum_sqrtF", inputs.sum_sqrtF}}},
                {"entries", rows}};
    }
};

// running max-norms while a step sweeps its points
class LedgerAccumulator {
public:
    LedgerAccumulator() : m_(ledger_names().size(), 0.0) {}

    void add(const scheme::PointTerms& p, const scheme::SlowPoint& sp, const Vec2& comm, const std::array<double, 2>& w) {
        auto up = [this](std::size_t k, double v) {
            if (!(std::fabs(v) <= m_[k])) m_[k] = std::isnan(v) ? std::numeric_limits<double>::infinity() : std::fabs(v);
        };
        auto upv = [&](std::size_t k, const Vec2& v) { up(k, max_abs(v)); };
        upv(0, p.R1[flux::Plus]);
        upv(1, p.R1[flux::Minus]);
        upv(2, p.R2[flux::Plus]);
        upv(3, p.R2[flux::Minus]);
        upv(4, p.R3);
        upv(5, p.R4);
        upv(6, p.R5);
        upv(7, p.Err1);
        upv(8, p.Err2);
        upv(9, p.Err3);
        upv(10, p.Rs);
        upv(11, comm);
        upv(12, p.W);
        up(13, w[flux::Plus]);
        up(14, w[flux::Minus]);
        upv(15, p.v1);
        upv(16, p.v2);
        for (int k = 0; k < 2; ++k) {
            in_.A = std::fmax(in_.A, p.a[static_cast<std::size_t>(k)]);
            in_.Ga = std::fmax(in_.Ga, std::fmax(std::fabs(p.a_t[static_cast<std::size_t>(k)]), std::fabs(p.a_x[static_cast<std::size_t>(k)])));
        }
        in_.G = std::fmax(in_.G, std::fmax(max_abs(sp.ut), max_abs(sp.ux)));
        in_.U = std::fmax(in_.U, max_abs(sp.u));
    }

    RemainderLedger finish(int level, double lam_n, double lam_next, double F_n, double sum_sqrtF, double C0) const {
        RemainderLedger L;
        L.level = level;
        L.inputs = in_;
        L.inputs.lam_n = lam_n;
        L.inputs.lam_next = lam_next;
        L.inputs.F_n = F_n;
        L.inputs.sum_sqrtF = sum_sqrtF;
        L.C0 = C0;
        const auto& names = ledger_names();
        for (std::size_t k = 0; k < names.size(); ++k) {
            LedgerEntry e{names[k], m_[k], predicted_bound(names[k], L.inputs), std::isfinite(m_[k])};
            if ((e.name == "w+" || e.name == "w-") && C0 > 0) e.pass = e.pass && e.measured <= C0 * e.predicted;
            L.entries.push_back(e);
        }
        return L;
    }

private:
    std::vector<double> m_;
    LedgerInputs in_;
};

// Case split of the error-level update by the mollified ratio E/F_n.
struct CaseReport {
    std::array<long, 3> counts{};  // E <= beta F, between, E >= gamma F
    std::array<double, 2> Emin{}, Emax{};
    double band_lo = 0, band_hi = 0;
    long below_band = 0, above_band = 0, nonpositive = 0;
    bool strict = true;
    std::array<double, 2> c2_in{}, c2_out{};  // sums of mollified E_n and E_{n+1} over Case-2 points

    double case2_ratio(int k) const {
        const auto uk = static_cast<std::size_t>(k);
        return c2_in[uk] > 0 ? c2_out[uk] / c2_in[uk] : std::numeric_limits<double>::quiet_NaN();
    }

    bool positive() const { return nonpositive == 0; }
    bool in_band() const { return below_band == 0 && above_band == 0; }
    nlohmann::json to_json() const {
        return {{"case1", counts[0]},       {"case3", counts[1]},        {"case2", counts[2]},
                {"E_minus_min", Emin[0]},   {"E_minus_max", Emax[0]},    {"E_plus_min", Emin[1]},
                {"E_plus_max", Emax[1]},    {"band_lo", band_lo},        {"band_hi", band_hi},
                {"below_band", below_band}, {"above_band", above_band}, {"nonpositive", nonpositive},
                {"in_band", in_band()},     {"positive", positive()},
                {"case2_ratio_minus", c2_in[0] > 0 ? nlohmann::json(case2_ratio(0)) : nlohmann::json(nullptr)},
                {"case2_ratio_plus", c2_in[1] > 0 ? nlohmann::json(case2_ratio(1)) : nlohmann::json(nullptr)}};
    }
};

inline int case_of(double ratio, double beta, double gamma) { return ratio <= beta ? 0 : (ratio >= gamma ? 2 : 1); }

// ---------------------------------------------------------------- identity check

struct PdeResidualReport {
    double max_norm = 0;   // grid calculus
    double weak_norm = 0;  // max over the bank of |pairing|
    int rows = 0;
    int tested = 0;
    nlohmann::json to_json() const { return {{"max_norm", max_norm}, {"weak_norm", weak_norm}, {"rows", rows}, {"tested", tested}}; }
};

// total flux f(u) + E_- b_- + E_+ b_+ as two fields
inline VecField total_flux(const VecField& u, const std::array<ScalarField, 2>& E, const dsl::FluxModel& f,
                           const flux::StructureConstants& sc) {
    const auto& g = u.grid();
    VecField F{ScalarField::zeros(g), ScalarField::zeros(g)};
    const double v0 = std::max({u[0].valid0(), u[1].valid0(), E[0].valid0(), E[1].valid0()});
    const double v1 = std::min({u[0].valid1(), u[1].valid1(), E[0].valid1(), E[1].valid1()});
    for (int c = 0; c < 2; ++c) {
        F[c].set_valid(v0, v1);
        std::fill(F[c].data().begin(), F[c].data().end(), std::numeric_limits<double>::quiet_NaN());
    }
    for (int n = F[0].first_valid_row(); n <= F[0].last_valid_row(); ++n)
        for (int i = 0; i < g.Nx; ++i) {
            const Vec2 uu{u[0].at(n, i), u[1].at(n, i)};
            const Vec2 tot = f.flux(uu) + E[flux::Minus].at(n, i) * sc.b[flux::Minus] + E[flux::Plus].at(n, i) * sc.b[flux::Plus];
            F[0].ref(n, i) = tot.x;
            F[1].ref(n, i) = tot.y;
        }
    return F;
}

// D = d_t u + d_x[f(u) + sum E_k b_k] on the valid window less `trim` rows per side,
// plus weak pairings against the bank members supported there
inline PdeResidualReport pde_residual_check(const VecField& u, const std::array<ScalarField, 2>& E, const dsl::FluxModel& f,
                                            const flux::StructureConstants& sc, const weak::TestFunctionBank* bank = nullptr,
                                            int trim = 2) {
    PdeResidualReport rep;
    const VecField F = total_flux(u, E, f, sc);
    VecField uu{u[0], u[1]};
    for (int c = 0; c < 2; ++c) uu[c].set_valid(F[0].valid0(), F[0].valid1());
    const auto& g = u.grid();
    const int lo = F[0].first_valid_row() + trim, hi = F[0].last_valid_row() - trim;
    if (uu.uniform()) {
        rep.max_norm = 0.0;
        rep.rows = std::max(0, hi - lo + 1);
    } else {
        for (int c = 0; c < 2; ++c) {
            const ScalarField ut = grid::deriv_t(uu[c].materialized());
            const ScalarField Fx = grid::deriv_x(F[c]);
            for (int n = lo; n <= hi; ++n)
                for (int i = 0; i < g.Nx; ++i) rep.max_norm = std::fmax(rep.max_norm, std::fabs(ut.at(n, i) + Fx.at(n, i)));
        }
        rep.rows = std::max(0, hi - lo + 1);
    }
    if (bank) {
        const double ta = g.t(std::max(lo, 0)), tb = g.t(std::min(hi, g.Nt - 1));
        for (const auto& phi : bank->items) {
            if (!weak::support_inside(phi, ta, tb)) continue;
            ++rep.tested;
            for (int c = 0; c < 2; ++c) rep.weak_norm = std::fmax(rep.weak_norm, std::fabs(weak::pair(uu[c].materialized(), F[c], phi)));
        }
    }
    return rep;
}

struct RefinementVerdict {
    double coarse = 0, fine = 0, ratio = 0, floor = 0;
    bool pass = false;
    nlohmann::json to_json() const { return {{"coarse", coarse}, {"fine", fine}, {"ratio", ratio}, {"floor", floor}, {"pass", pass}}; }
};

// ratio >= 3 under doubling, or both levels already at the stated rounding floor
inline RefinementVerdict refinement(double coarse, double fine, double floor = 0.0, double need = 3.0) {
    RefinementVerdict v{coarse, fine, fine > 0 ? coarse / fine : std::numeric_limits<double>::infinity(), floor, false};
    v.pass = v.ratio >= need || (floor > 0 && coarse <= floor && fine <= floor);
    return v;
}

// ---------------------------------------------------------------- corrector algebra on a constant state

struct OscillationReport {
    double split_max = 0;   // |D2f(0):(v1 x v1)/2 - sum_k a_k^2 (1 + cos 2 theta_k) b_k / 4 - cross|
    double cancel_max = 0;  // |d_t v2 + d_x[Df(0) v2 + osc - mean + R4 - R5 - Rs]|
    double v2_max = 0;
    int Nx = 0, Nt = 0, rows = 0;
    nlohmann::json to_json() const {
        return {{"split_max", split_max}, {"cancel_max", cancel_max}, {"v2_max", v2_max}, {"Nx", Nx}, {"Nt", Nt}, {"rows", rows}};
    }
};

// Rows are streamed through a five-row window so only O(Nx) storage is used.
// Requires a single active cutoff per family (constant state, lambda_n Lambda near an integer).
inline OscillationReport oscillation_check(const scheme::LevelContext& ctx, const scheme::SlowPoint& sp, int Nx, int Nt, double t0,
                                           double t1) {
    const auto& sc = *ctx.sc;
    OscillationReport rep;
    rep.Nx = Nx;
    rep.Nt = Nt;
    const double dt = (t1 - t0) / (Nt - 1), dx = 1.0 / Nx;
    std::array<std::vector<double>, 5> v2a, v2b, Ga, Gb;  // ring over rows
    std::vector<double> d0(static_cast<std::size_t>(Nx)), d1(static_cast<std::size_t>(Nx));
    const auto W = grid::fd4_stencil(2, 0, 4).w;
    const auto frame = flux::frame_at(*ctx.flux, sp.u);
    std::array<double, 2> speed{};
    for (int k = 0; k < 2; ++k) speed[static_cast<std::size_t>(k)] = ctx.bank.speed(ctx.bank.eval(frame.lambda[k]).e[0].j);
    for (int n = 0; n < Nt; ++n) {
        const double t = n == Nt - 1 ? t1 : t0 + dt * n;
        const std::size_t slot = static_cast<std::size_t>(n % 5);
        for (auto* buf : {&v2a[slot], &v2b[slot], &Ga[slot], &Gb[slot]}) buf->assign(static_cast<std::size_t>(Nx), 0.0);
        for (int i = 0; i < Nx; ++i) {
            const double x = dx * i;
            const scheme::PointTerms p = scheme::evaluate_point(ctx, sp, t, x);
            // closed-form quadratic for one active index per family
            Vec2 expect;
            std::array<double, 2> cth{};
            for (int k = 0; k < 2; ++k) {
                const double th = std::remainder(ctx.lam_next * x - ctx.lam_next * speed[static_cast<std::size_t>(k)] * t, scheme::kTwoPi) + ctx.phase.value(t);
                cth[static_cast<std::size_t>(k)] = std::cos(th);
                const double a = p.a[static_cast<std::size_t>(k)];
                expect += (0.25 * a * a * (1 + std::cos(2 * th))) * sc.b[static_cast<std::size_t>(k)];
            }
            expect += (p.a[0] * p.a[1] * cth[0] * cth[1]) * sc.d;
            rep.split_max = std::fmax(rep.split_max, max_abs(0.5 * sc.D2f0.apply(p.v1, p.v1) - expect));
            const Vec2 G = sc.Df0 * p.v2 + 0.5 * sc.D2f0.apply(p.V, p.V) - p.quad_mean + p.R4 - p.R5 - p.Rs;
            const auto ui = static_cast<std::size_t>(i);
            v2a[slot][ui] = p.v2.x;
            v2b[slot][ui] = p.v2.y;
            Ga[slot][ui] = G.x;
            Gb[slot][ui] = G.y;
            rep.v2_max = std::fmax(rep.v2_max, max_abs(p.v2));
        }
        if (n < 4) continue;
        // centre row m = n - 2
        const std::size_t mid = static_cast<std::size_t>((n - 2) % 5);
        for (int c = 0; c < 2; ++c) {
            auto& v2 = c == 0 ? v2a : v2b;
            auto& G = c == 0 ? Ga : Gb;
            grid::deriv_x_row(G[mid].data(), d0.data(), Nx, 1.0);
            for (int i = 0; i < Nx; ++i) {
                double vt = 0;
                for (int m = 0; m < 5; ++m) vt += W[static_cast<std::size_t>(m)] * v2[static_cast<std::size_t>((n - 4 + m) % 5)][static_cast<std::size_t>(i)];
                vt /= 12.0 * dt;
                rep.cancel_max = std::fmax(rep.cancel_max, std::fabs(vt + d0[static_cast<std::size_t>(i)]));
            }
        }
        ++rep.rows;
    }
    return rep;
}

}  // namespace hypci::residual
