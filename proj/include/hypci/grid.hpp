#pragma once
// Space-time fields on x in [0, Lx) (periodic) times t in [t0, t1]: mollification,
// spectral x-derivatives, fourth-order t-derivatives, antiderivatives, dumps.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypci::grid {

inline constexpr double kPi = 3.14159265358979323846;

class GridError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SpaceTimeGrid {
    int Nx = 64;
    double Lx = 1.0;  // x-period; 1 for the torus, a divisor of 1 under the symmetry reduction
    double t0 = 0.0, t1 = 1.0;
    int Nt = 5;
    double pad_t = 0.0;

    double dx() const { return Lx / Nx; }
    double dt() const { return (t1 - t0) / (Nt - 1); }
    double x(int i) const { return Lx * static_cast<double>(i) / Nx; }
    double t(int n) const { return n == Nt - 1 ? t1 : t0 + (t1 - t0) * static_cast<double>(n) / (Nt - 1); }
    std::size_t size() const { return static_cast<std::size_t>(Nx) * static_cast<std::size_t>(Nt); }
    void validate() const {
        if (Nx < 4 || (Nx & (Nx - 1)) != 0) throw GridError("Nx must be a power of two >= 4");
        if (Nt < 2) throw GridError("Nt must be >= 2");
        if (!(t1 > t0)) throw GridError("t1 must exceed t0");
        if (!(Lx > 0)) throw GridError("Lx must be positive");
    }
    bool operator==(const SpaceTimeGrid& o) const {
        return Nx == o.Nx && Lx == o.Lx && t0 == o.t0 && t1 == o.t1 && Nt == o.Nt;
    }
};

// A scalar field; uniform fields store one value and are exact fixed points of
// every linear operation here. Rows outside [valid0, valid1] hold NaN.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(const SpaceTimeGrid& g, double value) : g_(g), uniform_(true), value_(value), v0_(g.t0), v1_(g.t1) {}
    static ScalarField zeros(const SpaceTimeGrid& g) {
        ScalarField f;
        f.g_ = g;
        f.uniform_ = false;
        f.data_.assign(g.size(), 0.0);
        f.v0_ = g.t0;
        f.v1_ = g.t1;
        return f;
    }
    template <class Fn>
    static ScalarField sample(const SpaceTimeGrid& g, Fn&& fn) {
        ScalarField f = zeros(g);
        for (int n = 0; n < g.Nt; ++n) {
            const double t = g.t(n);
            double* row = f.row(n);
            for (int i = 0; i < g.Nx; ++i) row[i] = fn(t, g.x(i));
        }
        return f;
    }

    const SpaceTimeGrid& grid() const { return g_; }
    bool uniform() const { return uniform_; }
    double uniform_value() const { return value_; }
    double valid0() const { return v0_; }
    double valid1() const { return v1_; }
    void set_valid(double a, double b) { v0_ = a; v1_ = b; }

    double at(int n, int i) const { return uniform_ ? value_ : data_[idx(n, i)]; }
    double& ref(int n, int i) { return data_[idx(n, i)]; }
    double* row(int n) { return data_.data() + static_cast<std::size_t>(n) * g_.Nx; }
    const double* row(int n) const { return data_.data() + static_cast<std::size_t>(n) * g_.Nx; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    // rows whose time lies in the valid window (with a rounding allowance)
    int first_valid_row() const {
        const double tol = 1e-9 * g_.dt();
        int n = static_cast<int>(std::ceil((v0_ - g_.t0) / g_.dt() - 1e-9));
        n = std::max(n, 0);
        while (n < g_.Nt && g_.t(n) < v0_ - tol) ++n;
        return n;
    }
    int last_valid_row() const {
        const double tol = 1e-9 * g_.dt();
        int n = static_cast<int>(std::floor((v1_ - g_.t0) / g_.dt() + 1e-9));
        n = std::min(n, g_.Nt - 1);
        while (n >= 0 && g_.t(n) > v1_ + tol) --n;
        return n;
    }

    ScalarField materialized() const {
        if (!uniform_) return *this;
        ScalarField f = zeros(g_);
        std::fill(f.data_.begin(), f.data_.end(), value_);
        f.v0_ = v0_;
        f.v1_ = v1_;
        return f;
    }

private:
    std::size_t idx(int n, int i) const { return static_cast<std::size_t>(n) * g_.Nx + static_cast<std::size_t>(i); }
    SpaceTimeGrid g_;
    bool uniform_ = true;
    double value_ = 0.0;
    std::vector<double> data_;
    double v0_ = 0.0, v1_ = 0.0;
};

struct VecField {
    std::array<ScalarField, 2> c;
    ScalarField& operator[](int k) { return c[k]; }
    const ScalarField& operator[](int k) const { return c[k]; }
    const SpaceTimeGrid& grid() const { return c[0].grid(); }
    bool uniform() const { return c[0].uniform() && c[1].uniform(); }
};

// ---------------------------------------------------------------- reductions

// max |f| over rows with t in [ta, tb] intersected with the valid window; fixed order
inline double max_abs(const ScalarField& f, double ta = -std::numeric_limits<double>::infinity(),
                      double tb = std::numeric_limits<double>::infinity()) {
    if (f.uniform()) return std::fabs(f.uniform_value());
    const auto& g = f.grid();
    double m = 0.0;
    for (int n = f.first_valid_row(); n <= f.last_valid_row(); ++n) {
        const double t = g.t(n);
        if (t < ta || t > tb) continue;
        const double* r = f.row(n);
        for (int i = 0; i < g.Nx; ++i) m = std::max(m, std::fabs(r[i]));
    }
    return m;
}

inline double max_abs(const VecField& f, double ta = -std::numeric_limits<double>::infinity(),
                      double tb = std::numeric_limits<double>::infinity()) {
    return std::max(max_abs(f[0], ta, tb), max_abs(f[1], ta, tb));
}

// ---------------------------------------------------------------- FFT

namespace detail {

class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        in_ = fftw_alloc_real(static_cast<std::size_t>(n));
        out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        fwd_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    double* in() { return in_; }
    fftw_complex* spec() { return out_; }
    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }  // unnormalized

private:
    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan fwd_, bwd_;
};

inline RealFft& fft_for(int n) {
    static std::map<int, std::unique_ptr<RealFft>> cache;
    auto& p = cache[n];
    if (!p) p = std::make_unique<RealFft>(n);
    return *p;
}

}  // namespace detail

struct SpectralDiagnostics {
    long under_resolved_rows = 0;
    double worst_tail = 0.0;
};

inline SpectralDiagnostics& spectral_diagnostics() {
    static SpectralDiagnostics d;
    return d;
}

inline constexpr double kTailThreshold = 1e-8;

// One periodic row: out = d/dx in (exact for resolvable modes). in and out may alias.
inline void deriv_x_row(const double* in, double* out, int Nx, double Lx) {
    auto& f = detail::fft_for(Nx);
    std::memcpy(f.in(), in, sizeof(double) * static_cast<std::size_t>(Nx));
    f.forward();
    fftw_complex* s = f.spec();
    const double k0 = 2.0 * kPi / Lx;
    double total = 0.0, tail = 0.0;
    for (int k = 0; k <= Nx / 2; ++k) {
        const double e = s[k][0] * s[k][0] + s[k][1] * s[k][1];
        total += e;
        if (k > Nx / 4) tail += e;
        const double w = (k == Nx / 2) ? 0.0 : k0 * k / Nx;
        const double re = s[k][0], im = s[k][1];
        s[k][0] = -w * im;
        s[k][1] = w * re;
    }
    if (total > 0 && tail > kTailThreshold * total) {
        auto& d = spectral_diagnostics();
        ++d.under_resolved_rows;
        d.worst_tail = std::max(d.worst_tail, tail / total);
    }
    f.backward();
    std::memcpy(out, f.in(), sizeof(double) * static_cast<std::size_t>(Nx));
}

class NonzeroMean : public GridError {
public:
    using GridError::GridError;
};

inline constexpr double kMeanTol = 1e-8;

inline void antideriv_x_row(const double* in, double* out, int Nx, double Lx) {
    auto& f = detail::fft_for(Nx);
    std::memcpy(f.in(), in, sizeof(double) * static_cast<std::size_t>(Nx));
    f.forward();
    fftw_complex* s = f.spec();
    const double mean = s[0][0] / Nx;
    if (std::fabs(mean) > kMeanTol) throw NonzeroMean("nonzero-mean: x-mean " + std::to_string(mean));
    const double k0 = 2.0 * kPi / Lx;
    s[0][0] = s[0][1] = 0.0;
    for (int k = 1; k <= Nx / 2; ++k) {
        const double w = (k == Nx / 2) ? 0.0 : 1.0 / (k0 * k * Nx);
        const double re = s[k][0], im = s[k][1];
        s[k][0] = w * im;
        s[k][1] = -w * re;
    }
    f.backward();
    std::memcpy(out, f.in(), sizeof(double) * static_cast<std::size_t>(Nx));
}

inline ScalarField deriv_x(const ScalarField& f) {
    if (f.uniform()) {
        ScalarField z(f.grid(), 0.0);
        z.set_valid(f.valid0(), f.valid1());
        return z;
    }
    const auto& g = f.grid();
    ScalarField out = ScalarField::zeros(g);
    out.set_valid(f.valid0(), f.valid1());
    std::fill(out.data().begin(), out.data().end(), std::numeric_limits<double>::quiet_NaN());
    for (int n = f.first_valid_row(); n <= f.last_valid_row(); ++n) deriv_x_row(f.row(n), out.row(n), g.Nx, g.Lx);
    return out;
}

inline ScalarField antideriv_x(const ScalarField& f) {
    if (f.uniform()) {
        if (std::fabs(f.uniform_value()) > kMeanTol)
            throw NonzeroMean("nonzero-mean: constant " + std::to_string(f.uniform_value()));
        ScalarField z(f.grid(), 0.0);
        z.set_valid(f.valid0(), f.valid1());
        return z;
    }
    const auto& g = f.grid();
    ScalarField out = ScalarField::zeros(g);
    out.set_valid(f.valid0(), f.valid1());
    std::fill(out.data().begin(), out.data().end(), std::numeric_limits<double>::quiet_NaN());
    for (int n = f.first_valid_row(); n <= f.last_valid_row(); ++n) antideriv_x_row(f.row(n), out.row(n), g.Nx, g.Lx);
    return out;
}

// Fourth-order weights for d/dt at row offset `pos` within a 5-row stencil
// starting at `first`; central when 2 rows exist on both sides.
struct Fd4 {
    int first;
    std::array<double, 5> w;
};

inline Fd4 fd4_stencil(int n, int lo, int hi) {
    static constexpr std::array<std::array<double, 5>, 5> W = {{
        {-25, 48, -36, 16, -3},
        {-3, -10, 18, -6, 1},
        {1, -8, 0, 8, -1},
        {-1, 6, -18, 10, 3},
        {3, -16, 36, -48, 25},
    }};
    if (n - lo >= 2 && hi - n >= 2) return {n - 2, W[2]};
    if (n - lo < 2) return {lo, W[static_cast<std::size_t>(n - lo)]};
    return {hi - 4, W[static_cast<std::size_t>(4 - (hi - n))]};
}

class MissingDerivative : public GridError {
public:
    using GridError::GridError;
};

inline ScalarField deriv_t(const ScalarField& f) {
    if (f.uniform()) {
        ScalarField z(f.grid(), 0.0);
        z.set_valid(f.valid0(), f.valid1());
        return z;
    }
    const auto& g = f.grid();
    const int lo = f.first_valid_row(), hi = f.last_valid_row();
    if (hi - lo < 4) throw MissingDerivative("missing-derivative: fewer than 5 valid rows for d/dt");
    ScalarField out = ScalarField::zeros(g);
    out.set_valid(f.valid0(), f.valid1());
    std::fill(out.data().begin(), out.data().end(), std::numeric_limits<double>::quiet_NaN());
    const double inv = 1.0 / (12.0 * g.dt());
    for (int n = lo; n <= hi; ++n) {
        const Fd4 s = fd4_stencil(n, lo, hi);
        double* o = out.row(n);
        for (int i = 0; i < g.Nx; ++i) o[i] = 0.0;
        for (int m = 0; m < 5; ++m) {
            const double* r = f.row(s.first + m);
            const double w = s.w[static_cast<std::size_t>(m)] * inv;
            if (w == 0.0) continue;
            for (int i = 0; i < g.Nx; ++i) o[i] += w * r[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------- mollifier

class InsufficientPad : public GridError {
public:
    using GridError::GridError;
};

inline double bump(double s, double delta) {
    const double z = 2.0 * s / delta;
    if (std::fabs(z) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - z * z));
}

// Tensor-product kernel sampled on the grid and renormalized to unit mass.
struct Mollifier {
    double delta = 0.0;
    std::vector<double> wt, wx;  // odd-length symmetric weights
    int ht = 0, hx = 0;

    static Mollifier build(const SpaceTimeGrid& g, double delta) {
        Mollifier m;
        m.delta = delta;
        auto weights = [delta](double h, int& half) {
            half = delta > 0 ? static_cast<int>(std::floor(0.5 * delta / h)) : 0;
            while (half > 0 && bump(half * h, delta) == 0.0) --half;
            std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
            double s = 0.0;
            for (int k = -half; k <= half; ++k) s += (w[static_cast<std::size_t>(k + half)] = delta > 0 ? bump(k * h, delta) : 1.0);
            for (auto& v : w) v /= s;
            // fold the rounding residue into the centre so the sum is exactly 1 in fixed order
            double t = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k)
                if (static_cast<int>(k) != half) t += w[k];
            w[static_cast<std::size_t>(half)] = 1.0 - t;
            return w;
        };
        m.wt = weights(g.dt(), m.ht);
        m.wx = weights(g.dx(), m.hx);
        return m;
    }
    double mass() const {
        double s = 0.0;
        for (double a : wt)
            for (double b : wx) s += a * b;
        return s;
    }
};

inline ScalarField mollify(const ScalarField& f, const Mollifier& m) {
    const double nv0 = f.valid0() + 0.5 * m.delta;
    const double nv1 = f.valid1() - 0.5 * m.delta;
    if (!(nv1 > nv0)) throw InsufficientPad("insufficient-pad: valid window cannot absorb delta");
    if (f.uniform()) {
        ScalarField u(f.grid(), f.uniform_value());
        u.set_valid(nv0, nv1);
        return u;
    }
    const auto& g = f.grid();
    ScalarField out = ScalarField::zeros(g);
    out.set_valid(nv0, nv1);
    std::fill(out.data().begin(), out.data().end(), std::numeric_limits<double>::quiet_NaN());
    const int lo = out.first_valid_row(), hi = out.last_valid_row();
    if (lo - m.ht < f.first_valid_row() || hi + m.ht > f.last_valid_row())
        throw InsufficientPad("insufficient-pad: kernel rows leave the valid window");
    std::vector<double> tmp(static_cast<std::size_t>(g.Nx));
    for (int n = lo; n <= hi; ++n) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (int k = -m.ht; k <= m.ht; ++k) {
            const double w = m.wt[static_cast<std::size_t>(k + m.ht)];
            const double* r = f.row(n + k);
            for (int i = 0; i < g.Nx; ++i) tmp[static_cast<std::size_t>(i)] += w * r[i];
        }
        double* o = out.row(n);
        if (m.hx == 0) {
            std::copy(tmp.begin(), tmp.end(), o);
            continue;
        }
        for (int i = 0; i < g.Nx; ++i) {
            double s = 0.0;
            for (int k = -m.hx; k <= m.hx; ++k) {
                int j = i + k;
                j = ((j % g.Nx) + g.Nx) % g.Nx;
                s += m.wx[static_cast<std::size_t>(k + m.hx)] * tmp[static_cast<std::size_t>(j)];
            }
            o[i] = s;
        }
    }
    return out;
}

inline VecField mollify(const VecField& f, const Mollifier& m) { return {mollify(f[0], m), mollify(f[1], m)}; }

// ---------------------------------------------------------------- I/O

// NDJSON header line followed by little-endian float64 payload in (t, x, component) order.
inline void dump(const std::string& path, const std::vector<const ScalarField*>& comps, const std::vector<std::string>& names,
                 const nlohmann::json& meta = nlohmann::json::object()) {
    if (comps.empty()) throw GridError("dump: no components");
    const auto& g = comps[0]->grid();
    nlohmann::json h;
    h["format"] = "hypci-field";
    h["version"] = 1;
    h["Nx"] = g.Nx;
    h["Nt"] = g.Nt;
    h["Lx"] = g.Lx;
    h["t0"] = g.t0;
    h["t1"] = g.t1;
    h["components"] = comps.size();
    h["names"] = names;
    double v0 = -std::numeric_limits<double>::infinity(), v1 = std::numeric_limits<double>::infinity();
    for (auto* c : comps) {
        v0 = std::max(v0, c->valid0());
        v1 = std::min(v1, c->valid1());
    }
    h["valid"] = {v0, v1};
    h["byte_order"] = "little";
    h["meta"] = meta;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw GridError("dump: cannot open " + path);
    os << h.dump() << '\n';
    std::vector<double> buf(static_cast<std::size_t>(g.Nx) * comps.size());
    for (int n = 0; n < g.Nt; ++n) {
        for (int i = 0; i < g.Nx; ++i)
            for (std::size_t c = 0; c < comps.size(); ++c) buf[static_cast<std::size_t>(i) * comps.size() + c] = comps[c]->at(n, i);
        static_assert(std::endian::native == std::endian::little, "payload assumes a little-endian host");
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
    }
}

struct Dump {
    nlohmann::json header;
    std::vector<ScalarField> comps;
};

inline Dump load_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw GridError("load: cannot open " + path);
    std::string line;
    std::getline(is, line);
    Dump d;
    d.header = nlohmann::json::parse(line);
    if (d.header.value("format", "") != "hypci-field") throw GridError("load: not a field dump");
    SpaceTimeGrid g;
    g.Nx = d.header["Nx"];
    g.Nt = d.header["Nt"];
    g.Lx = d.header["Lx"];
    g.t0 = d.header["t0"];
    g.t1 = d.header["t1"];
    const std::size_t nc = d.header["components"];
    for (std::size_t c = 0; c < nc; ++c) {
        d.comps.push_back(ScalarField::zeros(g));
        d.comps.back().set_valid(d.header["valid"][0], d.header["valid"][1]);
    }
    std::vector<double> buf(static_cast<std::size_t>(g.Nx) * nc);
    for (int n = 0; n < g.Nt; ++n) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
        if (!is) throw GridError("load: truncated payload");
        for (int i = 0; i < g.Nx; ++i)
            for (std::size_t c = 0; c < nc; ++c) d.comps[c].ref(n, i) = buf[static_cast<std::size_t>(i) * nc + c];
    }
    return d;
}

inline void write_csv(const std::string& path, const std::vector<const ScalarField*>& comps, const std::vector<std::string>& names) {
    const auto& g = comps.at(0)->grid();
    if (g.size() > (1u << 22)) throw GridError("csv export is limited to small grids");
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw GridError("csv: cannot open " + path);
    std::fprintf(fp, "t,x");
    for (const auto& n : names) std::fprintf(fp, ",%s", n.c_str());
    std::fprintf(fp, "\n");
    for (int n = 0; n < g.Nt; ++n)
        for (int i = 0; i < g.Nx; ++i) {
            std::fprintf(fp, "%.17g,%.17g", g.t(n), g.x(i));
            for (auto* c : comps) std::fprintf(fp, ",%.17g", c->at(n, i));
            std::fprintf(fp, "\n");
        }
    std::fclose(fp);
}

}  // namespace hypci::grid
