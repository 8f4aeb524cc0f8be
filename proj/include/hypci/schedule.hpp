#pragma once
// Frequency / mollification / error-level schedules and their constraint report.

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypci::scheme {

inline constexpr double kTwoPi = 6.28318530717958647692;

enum class Mode { Strict, Relaxed };

inline std::string to_string(Mode m) { return m == Mode::Strict ? "strict" : "relaxed"; }
inline Mode mode_from_string(const std::string& s) {
    if (s == "strict") return Mode::Strict;
    if (s == "relaxed") return Mode::Relaxed;
    throw std::invalid_argument("unknown mode '" + s + "' (strict|relaxed)");
}

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScheduleParams {
    Mode mode = Mode::Strict;
    double eps_cond = 0.1;
    double eps_amp = 0.016;
    double r = 0.8;
    double c_q = 0.23;
    double beta_cut = 0.54;
    double gamma_cut = 0.55;
    double C0 = 1.0;
    double Cstar = 0.0;  // 0: not yet measured
    double lambda0 = 3.0;
    int K = 16;
    int levels = 2;  // lambda_0 .. lambda_{levels-1}
};

// Strict-mode defaults are above; relaxed defaults trade r for a faster band decay.
inline ScheduleParams relaxed_defaults() {
    ScheduleParams p;
    p.mode = Mode::Relaxed;
    p.r = 0.75;
    p.eps_amp = 0.015;
    p.lambda0 = 64.0;
    p.levels = 4;
    return p;
}

struct ParamSchedule {
    ScheduleParams p;
    std::vector<double> lambda, delta, F;
    std::vector<long> N;  // lambda_n = 2 pi N_n for n >= 1 (N_0 = 0 when lambda_0 is not in 2 pi N)

    int levels() const { return static_cast<int>(lambda.size()); }
    double sum_sqrtF(int n) const {
        double s = 0;
        for (int j = 0; j <= n; ++j) s += std::sqrt(F[static_cast<std::size_t>(j)]);
        return s;
    }
    // common x-period of every phase: 1/N_1 when each N_n (n>=1) is a multiple of N_1
    double reduced_period() const {
        if (N.size() < 2 || N[1] <= 0) return 1.0;
        for (std::size_t n = 2; n < N.size(); ++n)
            if (N[n] % N[1] != 0) return 1.0;
        return 1.0 / static_cast<double>(N[1]);
    }
};

inline double F_level(const ScheduleParams& p, int n) { return p.eps_amp * p.eps_amp * std::pow(p.r, 2.0 * n) / (p.C0 * p.C0); }

// upper bound on delta_n * lambda_n from the two smallness requirements
inline double delta_lambda_cap(const ScheduleParams& p, const std::vector<double>& F, int n) {
    double s = 0;
    for (int j = 0; j <= n; ++j) s += std::sqrt(F[static_cast<std::size_t>(j)]);
    const double a = std::pow(p.r, 2.0 * n) * std::pow(p.eps_amp, 3) / (std::pow(p.C0, 3) * (1 - p.r));
    const double b = F[static_cast<std::size_t>(n)] * s;
    return std::fmin(a, b);
}

inline long round_up_2pi(double lam) { return static_cast<long>(std::ceil(lam / kTwoPi - 1e-12)); }

inline ParamSchedule build_schedule(const ScheduleParams& p) {
    if (p.levels < 1) throw ScheduleError("levels must be >= 1");
    if (!(p.C0 > 0)) throw ScheduleError("C0 must be positive");
    if (!(p.lambda0 > 0)) throw ScheduleError("lambda0 must be positive");
    ParamSchedule s;
    s.p = p;
    for (int n = 0; n < p.levels; ++n) s.F.push_back(F_level(p, n));
    s.lambda.push_back(p.lambda0);
    s.N.push_back(std::fabs(p.lambda0 / kTwoPi - std::round(p.lambda0 / kTwoPi)) < 1e-12 ? std::lround(p.lambda0 / kTwoPi) : 0);
    for (int n = 0; n + 1 < p.levels; ++n) {
        const double lam = s.lambda.back();
        const double dl = delta_lambda_cap(p, s.F, n);
        long Nn;
        if (p.mode == Mode::Strict) {
            const double need = std::fmax(std::pow(lam, 5), std::fmax(std::sqrt(lam * lam * lam / s.F[static_cast<std::size_t>(n)]), std::sqrt(lam) / dl));
            Nn = round_up_2pi(need);
        } else if (n == 0 || s.N.back() == 0) {
            Nn = round_up_2pi(p.K * lam);
        } else {
            Nn = p.K * s.N.back();
        }
        s.N.push_back(Nn);
        s.lambda.push_back(kTwoPi * static_cast<double>(Nn));
    }
    for (int n = 0; n < p.levels; ++n) s.delta.push_back(delta_lambda_cap(p, s.F, n) / s.lambda[static_cast<std::size_t>(n)]);
    return s;
}

struct Constraint {
    std::string name;
    int level = -1;
    double lhs = 0, rhs = 0;
    bool ok = false;
};

struct ScheduleReport {
    std::vector<Constraint> items;
    bool all_ok = true;
    int violations = 0;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& c : items) j.push_back({{"name", c.name}, {"level", c.level}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"ok", c.ok}});
        return j;
    }
};

// dephase radius constant for sup |Lambda(0)|
inline double dephase_C(double sup_speed) { return 8.0 * (1.0 + sup_speed) / 3.14159265358979323846; }

inline ScheduleReport validate(const ParamSchedule& s, double delta_Lambda, double sup_speed = 1.0) {
    ScheduleReport rep;
    const auto& p = s.p;
    auto add = [&](const std::string& name, int level, double lhs, double rhs) {
        Constraint c{name, level, lhs, rhs, lhs <= rhs};
        if (!c.ok) {
            rep.all_ok = false;
            ++rep.violations;
        }
        rep.items.push_back(c);
    };
    const double e = p.eps_cond;
    const double low = (1 - 2 * e) * p.beta_cut / (2 - 2 * e);
    add("c_q < (1-2e)beta/(2-2e)", -1, p.c_q, low * (1 - 1e-15));
    add("(1-2e)beta/(2-2e) < beta", -1, low, p.beta_cut * (1 - 1e-15));
    add("beta < gamma", -1, p.beta_cut, p.gamma_cut * (1 - 1e-15));
    add("gamma < 1/(2-2e)", -1, p.gamma_cut, 1 / (2 - 2 * e) * (1 - 1e-15));
    add("c_q < (1-2e)beta/((2-2e)gamma)", -1, p.c_q, low / p.gamma_cut * (1 - 1e-15));
    add("1/2 + eps_amp/(1-r) <= r^2", -1, 0.5 + p.eps_amp / (1 - p.r), p.r * p.r);
    add("r^2 <= 1 - eps_amp/(c_q(1-r))", -1, p.r * p.r, 1 - p.eps_amp / (p.c_q * (1 - p.r)));
    add("lambda_0 > 4/delta_Lambda", 0, 4 / delta_Lambda, s.lambda[0] * (1 - 1e-15));
    for (int n = 0; n < s.levels(); ++n) {
        const auto un = static_cast<std::size_t>(n);
        const double lam = s.lambda[un];
        add("F_n <= r^(2n)", n, s.F[un], std::pow(p.r, 2.0 * n));
        add("delta_n lambda_n <= r^(2n) eps^3/(C0^3 (1-r))", n, s.delta[un] * lam,
            std::pow(p.r, 2.0 * n) * std::pow(p.eps_amp, 3) / (std::pow(p.C0, 3) * (1 - p.r)) * (1 + 1e-12));
        add("delta_n lambda_n <= F_n sum sqrt(F_j)", n, s.delta[un] * lam, s.F[un] * s.sum_sqrtF(n) * (1 + 1e-12));
        add("delta_n <= 1/(2 C lambda_n)", n, s.delta[un], 1 / (2 * dephase_C(sup_speed) * lam));
        if (n >= 1) {
            const double frac = std::fabs(lam / kTwoPi - std::round(lam / kTwoPi));
            add("lambda_n in 2 pi N", n, frac, 1e-9);
        }
        if (n + 1 < s.levels()) {
            const double next = s.lambda[un + 1];
            add("lambda_{n+1} >= lambda_n^5", n, std::pow(lam, 5), next);
            add("lambda_n^3/lambda_{n+1}^2 <= F_n", n, lam * lam * lam / (next * next), s.F[un]);
            add("sqrt(lambda_n)/lambda_{n+1} <= delta_n lambda_n", n, std::sqrt(lam) / next, s.delta[un] * lam * (1 + 1e-12));
        }
    }
    return rep;
}

inline nlohmann::json to_json(const ParamSchedule& s) {
    const auto& p = s.p;
    return {{"mode", to_string(p.mode)}, {"eps_cond", p.eps_cond}, {"eps_amp", p.eps_amp}, {"r", p.r},
            {"c_q", p.c_q}, {"beta_cut", p.beta_cut}, {"gamma_cut", p.gamma_cut}, {"C0", p.C0},
            {"Cstar", p.Cstar}, {"K", p.K}, {"lambda", s.lambda}, {"delta", s.delta}, {"F", s.F}, {"N", s.N}};
}

}  // namespace hypci::scheme
