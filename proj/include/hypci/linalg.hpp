#pragma once
// Fixed-size 2-vectors, 2x2 matrices and the symmetric 2x2x2 Hessian of a flux.

#include <array>
#include <cmath>

namespace hypci {

struct Vec2 {
    double x = 0.0, y = 0.0;
    constexpr double& operator[](int i) { return i == 0 ? x : y; }
    constexpr double operator[](int i) const { return i == 0 ? x : y; }
    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
// det of the matrix with columns a, b
constexpr double det(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline double max_abs(const Vec2& a) { return std::fmax(std::fabs(a.x), std::fabs(a.y)); }

struct Mat2 {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;  // [[a, b], [c, d]]
    constexpr double operator()(int i, int j) const {
        return i == 0 ? (j == 0 ? a : b) : (j == 0 ? c : d);
    }
    constexpr double& at(int i, int j) { return i == 0 ? (j == 0 ? a : b) : (j == 0 ? c : d); }
    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    constexpr double trace() const { return a + d; }
    constexpr double determinant() const { return a * d - b * c; }
};

constexpr Vec2 operator*(const Mat2& m, const Vec2& v) { return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y}; }
constexpr Mat2 operator+(const Mat2& m, const Mat2& n) { return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d}; }
constexpr Mat2 operator-(const Mat2& m, const Mat2& n) { return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d}; }
constexpr Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }
inline double max_abs(const Mat2& m) {
    return std::fmax(std::fmax(std::fabs(m.a), std::fabs(m.b)), std::fmax(std::fabs(m.c), std::fabs(m.d)));
}

// Solve m x = rhs by Cramer's rule; returns false when |det| <= tol * scale.
inline bool solve(const Mat2& m, const Vec2& rhs, Vec2& out, double tol = 1e-14) {
    const double dt = m.determinant();
    const double scale = std::fmax(1.0, max_abs(m) * max_abs(m));
    if (!(std::fabs(dt) > tol * scale)) return false;
    out = {(rhs.x * m.d - m.b * rhs.y) / dt, (m.a * rhs.y - rhs.x * m.c) / dt};
    return true;
}

// comp[k](i, j) = d^2 f_k / du_i du_j
struct Hess2 {
    std::array<Mat2, 2> comp{};
    // D2f : (p (x) q)
    constexpr Vec2 apply(const Vec2& p, const Vec2& q) const {
        Vec2 r;
        for (int k = 0; k < 2; ++k) {
            const Mat2& h = comp[k];
            r[k] = p.x * (h.a * q.x + h.b * q.y) + p.y * (h.c * q.x + h.d * q.y);
        }
        return r;
    }
};

}  // namespace hypci
