#pragma once
// Compactly supported space-time test functions and weak pairings against them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hypci/grid.hpp"

namespace hypci::weak {

// (1 - s^2)^8 on (-1, 1): C^7, and grid sums against it converge at eighth order
inline double bump1(double s) { return std::fabs(s) < 1.0 ? std::pow(1.0 - s * s, 8) : 0.0; }
inline double bump1_deriv(double s) { return std::fabs(s) < 1.0 ? -16.0 * s * std::pow(1.0 - s * s, 7) : 0.0; }

// phi(t, x) = (1 + slope*(t - tc)/wt) bump((t-tc)/wt) bump(dist(x, xc)/wx), x periodic with period Lx
struct TestFunction {
    double tc = 0, xc = 0, wt = 1, wx = 1, slope = 0, Lx = 1;

    double xoff(double x) const {
        double d = std::fmod(x - xc, Lx);
        if (d > 0.5 * Lx) d -= Lx;
        if (d < -0.5 * Lx) d += Lx;
        return d;
    }
    double value(double t, double x) const {
        const double st = (t - tc) / wt, sx = xoff(x) / wx;
        return (1 + slope * st) * bump1(st) * bump1(sx);
    }
    double dt(double t, double x) const {
        const double st = (t - tc) / wt, sx = xoff(x) / wx;
        return ((slope * bump1(st) + (1 + slope * st) * bump1_deriv(st)) / wt) * bump1(sx);
    }
    double dx(double t, double x) const {
        const double st = (t - tc) / wt, sx = xoff(x) / wx;
        return (1 + slope * st) * bump1(st) * bump1_deriv(sx) / wx;
    }
    double t_lo() const { return tc - wt; }
    double t_hi() const { return tc + wt; }
};

struct TestFunctionBank {
    std::vector<TestFunction> items;

    // widths log-uniform in [0.05, 0.3] of the window; supports stay inside (t0, t1)
    static TestFunctionBank make(std::uint64_t seed, int count, double t0, double t1, double Lx) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        TestFunctionBank b;
        const double T = t1 - t0;
        for (int k = 0; k < count; ++k) {
            TestFunction f;
            f.Lx = Lx;
            f.wt = T * std::exp(std::log(0.05) + (std::log(0.3) - std::log(0.05)) * U(rng)) * 0.5;
            f.wx = Lx * std::exp(std::log(0.05) + (std::log(0.3) - std::log(0.05)) * U(rng)) * 0.5;
            f.tc = t0 + f.wt + (T - 2 * f.wt) * U(rng);
            f.xc = Lx * U(rng);
            f.slope = 2 * U(rng) - 1;
            b.items.push_back(f);
        }
        return b;
    }
};

namespace detail {

inline constexpr int kSamplesPerHalfWidth = 24;
inline constexpr int kMaxRefine = 64;

// power-of-two subdivision giving each half-width enough samples
inline int refine_factor(double half_width, double h) {
    int p = 1;
    while (p < kMaxRefine && half_width * p < kSamplesPerHalfWidth * h) p *= 2;
    return p;
}

// trigonometric interpolant of a periodic row, resampled on M >= Nx points
inline void upsample_row(const double* in, int Nx, int M, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(M), 0.0);
    if (M == Nx) {
        std::copy(in, in + Nx, out.begin());
        return;
    }
    auto& a = grid::detail::fft_for(Nx);
    std::copy(in, in + Nx, a.in());
    a.forward();
    auto& b = grid::detail::fft_for(M);
    fftw_complex* sb = b.spec();
    for (int k = 0; k <= M / 2; ++k) sb[k][0] = sb[k][1] = 0.0;
    const fftw_complex* sa = a.spec();
    for (int k = 0; k < Nx / 2; ++k) {
        sb[k][0] = sa[k][0] / Nx;
        sb[k][1] = sa[k][1] / Nx;
    }
    // split the Nyquist mode so the interpolant stays real and symmetric
    sb[Nx / 2][0] = 0.5 * sa[Nx / 2][0] / Nx;
    b.backward();
    std::copy(b.in(), b.in() + M, out.begin());
}

// Lagrange weights for the value at s (in row units) from rows first..first+m-1
inline void lagrange(double s, int first, int m, double* w) {
    for (int a = 0; a < m; ++a) {
        double v = 1;
        for (int b = 0; b < m; ++b)
            if (b != a) v *= (s - (first + b)) / static_cast<double>(a - b);
        w[a] = v;
    }
}

}  // namespace detail

// int int (rho phi_t + flux phi_x) dx dt. phi separates into a time factor and a
// periodic bump in x, so each row reduces to two x-moments taken on the spectral
// interpolant; the moments are then interpolated in t (6 points) on a subdivided
// time grid. Rows outside the valid range are ignored (phi must vanish there).
inline double pair(const grid::ScalarField& density, const grid::ScalarField& fluxf, const TestFunction& phi) {
    const auto& g = density.grid();
    const int lo = std::max(density.first_valid_row(), fluxf.first_valid_row());
    const int hi = std::min(density.last_valid_row(), fluxf.last_valid_row());
    if (hi < lo) return 0.0;
    const double dt = g.dt(), dx = g.dx();
    const int px = detail::refine_factor(phi.wx, dx);
    const int pt = hi > lo ? detail::refine_factor(phi.wt, dt) : 1;
    const int M = g.Nx * px;
    const double hx = g.Lx / M;

    std::vector<double> B(static_cast<std::size_t>(M)), dB(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        const double s = phi.xoff(g.x(0) + i * hx) / phi.wx;
        B[static_cast<std::size_t>(i)] = bump1(s);
        dB[static_cast<std::size_t>(i)] = bump1_deriv(s) / phi.wx;
    }

    // moments only where phi is nonzero, with a stencil margin
    const int r0 = std::max(lo, static_cast<int>(std::floor((phi.t_lo() - g.t0) / dt)) - 3);
    const int r1 = std::min(hi, static_cast<int>(std::ceil((phi.t_hi() - g.t0) / dt)) + 3);
    if (r1 < r0) return 0.0;
    std::vector<double> R(static_cast<std::size_t>(r1 - r0 + 1)), Q(R.size()), buf;
    for (int n = r0; n <= r1; ++n) {
        double r = 0, q = 0;
        detail::upsample_row(density.row(n), g.Nx, M, buf);
        for (int i = 0; i < M; ++i) r += buf[static_cast<std::size_t>(i)] * B[static_cast<std::size_t>(i)];
        detail::upsample_row(fluxf.row(n), g.Nx, M, buf);
        for (int i = 0; i < M; ++i) q += buf[static_cast<std::size_t>(i)] * dB[static_cast<std::size_t>(i)];
        R[static_cast<std::size_t>(n - r0)] = r * hx;
        Q[static_cast<std::size_t>(n - r0)] = q * hx;
    }

    const int m = std::min(6, r1 - r0 + 1);
    double w[6];
    double total = 0;
    const int nsub = (r1 - r0) * pt;
    for (int j = 0; j <= nsub; ++j) {
        const double s = r0 + static_cast<double>(j) / pt;  // row coordinate
        const double t = g.t0 + s * dt;
        const double st = (t - phi.tc) / phi.wt;
        if (std::fabs(st) >= 1.0) continue;
        const double At = (phi.slope * bump1(st) + (1 + phi.slope * st) * bump1_deriv(st)) / phi.wt;
        const double Ct = (1 + phi.slope * st) * bump1(st);
        double r = 0, q = 0;
        if (j % pt == 0) {
            const auto k = static_cast<std::size_t>(j / pt);
            r = R[k];
            q = Q[k];
        } else {
            const int first = std::clamp(static_cast<int>(std::floor(s)) - (m / 2 - 1), r0, r1 - m + 1);
            detail::lagrange(s, first, m, w);
            for (int a = 0; a < m; ++a) {
                r += w[a] * R[static_cast<std::size_t>(first + a - r0)];
                q += w[a] * Q[static_cast<std::size_t>(first + a - r0)];
            }
        }
        total += At * r + Ct * q;
    }
    return total * dt / pt;
}

inline bool support_inside(const TestFunction& phi, double ta, double tb) { return phi.t_lo() >= ta && phi.t_hi() <= tb; }

}  // namespace hypci::weak
