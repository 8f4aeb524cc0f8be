#pragma once
// Speed cutoffs, amplitude rule and time phases.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hypci::scheme {

inline constexpr double kPiL = 3.14159265358979323846;

// C-infinity step: 0 for tau <= 0, 1 for tau >= 1.
inline double smooth_step(double tau) {
    if (tau <= 0) return 0.0;
    if (tau >= 1) return 1.0;
    const double a = std::exp(-1.0 / tau), b = std::exp(-1.0 / (1.0 - tau));
    return a / (a + b);
}

inline double smooth_step_deriv(double tau) {
    if (tau <= 0 || tau >= 1) return 0.0;
    const double a = std::exp(-1.0 / tau), b = std::exp(-1.0 / (1.0 - tau));
    const double da = a / (tau * tau), db = -b / ((1.0 - tau) * (1.0 - tau));
    return (da * b - a * db) / ((a + b) * (a + b));
}

// 1 on |s| <= 1/3, 0 on |s| >= 2/3
inline double cutoff_profile(double s) { return smooth_step(3.0 * (2.0 / 3.0 - std::fabs(s))); }
inline double cutoff_profile_deriv(double s) {
    const double sg = s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0);
    return -3.0 * sg * smooth_step_deriv(3.0 * (2.0 / 3.0 - std::fabs(s)));
}

struct ActiveCutoff {
    long j = 0;
    double phi = 0.0;   // phi_{n,j}(Lambda)
    double dphi = 0.0;  // d phi_{n,j} / d Lambda
};

struct ActiveSet {
    std::array<ActiveCutoff, 3> e{};
    int count = 0;
};

// phi_{n,j}(y) = h(lambda_n y - j) / sqrt(sum_k h(lambda_n y - k)^2)
class CutoffBank {
public:
    CutoffBank() = default;
    explicit CutoffBank(double lambda_n) : lam_(lambda_n) {}

    double lambda() const { return lam_; }
    double speed(long j) const { return static_cast<double>(j) / lam_; }

    ActiveSet eval(double Lambda) const {
        const double y = lam_ * Lambda;
        const long base = static_cast<long>(std::floor(y));
        double hv[4], dh[4];
        double S2 = 0, Shh = 0;
        for (int m = 0; m < 4; ++m) {
            const double s = y - static_cast<double>(base - 1 + m);
            hv[m] = cutoff_profile(s);
            dh[m] = cutoff_profile_deriv(s);
            S2 += hv[m] * hv[m];
            Shh += hv[m] * dh[m];
        }
        const double S = std::sqrt(S2);
        ActiveSet out;
        for (int m = 0; m < 4; ++m) {
            if (hv[m] == 0.0) continue;
            ActiveCutoff c;
            c.j = base - 1 + m;
            c.phi = hv[m] / S;
            c.dphi = lam_ * (dh[m] / S - hv[m] * Shh / (S2 * S));
            out.e[static_cast<std::size_t>(out.count++)] = c;
        }
        return out;
    }

    double phi(long j, double Lambda) const {
        const auto a = eval(Lambda);
        for (int m = 0; m < a.count; ++m)
            if (a.e[static_cast<std::size_t>(m)].j == j) return a.e[static_cast<std::size_t>(m)].phi;
        return 0.0;
    }

private:
    double lam_ = 1.0;
};

inline double localized_speed(double lambda_n, long j) { return static_cast<double>(j) / lambda_n; }

// a = sqrt(2 phi_bg(E/F)^2 E); phi_bg smooth, 0 below beta, 1 above gamma
struct AmplitudeRule {
    double beta = 0.54, gamma = 0.55, F = 1.0;

    double cut(double s) const { return smooth_step((s - beta) / (gamma - beta)); }
    double cut_deriv(double s) const { return smooth_step_deriv((s - beta) / (gamma - beta)) / (gamma - beta); }

    double amplitude(double E) const {
        if (!(E > 0)) return 0.0;
        return std::sqrt(2.0) * cut(E / F) * std::sqrt(E);
    }
    double amplitude_deriv(double E) const {
        if (!(E > 0)) return 0.0;
        const double s = E / F;
        return std::sqrt(2.0) * (cut_deriv(s) * std::sqrt(E) / F + cut(s) / (2.0 * std::sqrt(E)));
    }
};

// Time phase P: zero, or psi with psi = 0 for t <= -1 and pi for t >= -1/2 (quintic smoothstep).
struct PhaseFn {
    enum class Tag { Zero, Psi } tag = Tag::Zero;

    static PhaseFn zero() { return {Tag::Zero}; }
    static PhaseFn psi() { return {Tag::Psi}; }
    static PhaseFn from_string(const std::string& s) {
        if (s == "zero" || s == "0") return zero();
        if (s == "psi") return psi();
        throw std::invalid_argument("unknown phase '" + s + "' (zero|psi)");
    }
    std::string name() const { return tag == Tag::Zero ? "zero" : "psi"; }

    double value(double t) const {
        if (tag == Tag::Zero || t <= -1.0) return 0.0;
        if (t >= -0.5) return kPiL;
        const double s = 2.0 * (t + 1.0);
        return kPiL * s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    }
    double deriv(double t) const {
        if (tag == Tag::Zero || t <= -1.0 || t >= -0.5) return 0.0;
        const double s = 2.0 * (t + 1.0);
        return 2.0 * kPiL * 30.0 * s * s * (1.0 - s) * (1.0 - s);
    }
    double deriv2(double t) const {
        if (tag == Tag::Zero || t <= -1.0 || t >= -0.5) return 0.0;
        const double s = 2.0 * (t + 1.0);
        return 4.0 * kPiL * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    }
};

}  // namespace hypci::scheme
