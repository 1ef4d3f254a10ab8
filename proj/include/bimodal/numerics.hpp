#pragma once

// Small numerical helpers shared across the library: complex 3-vectors and
// 3x3 tensors, composite trapezoid, adaptive Simpson quadrature and a dense
// solver for the tiny least-squares systems of the mode fitter.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "bimodal/errors.hpp"

namespace bimodal {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx iu{0.0, 1.0};

// ---------------------------------------------------------------------------
// Complex 3-vector / 3x3 tensor

struct Vec3c {
    std::array<cplx, 3> v{};

    cplx& operator[](std::size_t i) { return v[i]; }
    const cplx& operator[](std::size_t i) const { return v[i]; }
};

inline Vec3c operator+(const Vec3c& a, const Vec3c& b) {
    return {{{a[0] + b[0], a[1] + b[1], a[2] + b[2]}}};
}

inline Vec3c operator-(const Vec3c& a, const Vec3c& b) {
    return {{{a[0] - b[0], a[1] - b[1], a[2] - b[2]}}};
}

inline Vec3c operator*(const cplx& s, const Vec3c& a) {
    return {{{s * a[0], s * a[1], s * a[2]}}};
}

// Unconjugated dot product; complex polarization vectors contract plainly.
inline cplx dot(const Vec3c& a, const Vec3c& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3c conj(const Vec3c& a) {
    return {{{std::conj(a[0]), std::conj(a[1]), std::conj(a[2])}}};
}

inline double norm2(const Vec3c& a) {
    return std::norm(a[0]) + std::norm(a[1]) + std::norm(a[2]);
}

struct Mat3c {
    std::array<cplx, 9> m{};

    cplx& operator()(std::size_t r, std::size_t c) { return m[3 * r + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return m[3 * r + c]; }

    static Mat3c outer(const Vec3c& a, const Vec3c& b) {
        Mat3c out;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) out(r, c) = a[r] * b[c];
        return out;
    }
};

inline Mat3c operator+(const Mat3c& a, const Mat3c& b) {
    Mat3c out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = a.m[i] + b.m[i];
    return out;
}

inline Mat3c operator-(const Mat3c& a, const Mat3c& b) {
    Mat3c out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = a.m[i] - b.m[i];
    return out;
}

inline Mat3c operator*(const cplx& s, const Mat3c& a) {
    Mat3c out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = s * a.m[i];
    return out;
}

inline Mat3c operator*(double s, const Mat3c& a) { return cplx(s, 0.0) * a; }

inline Mat3c transpose(const Mat3c& a) {
    Mat3c out;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) out(r, c) = a(c, r);
    return out;
}

inline Mat3c adjoint(const Mat3c& a) {
    Mat3c out;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) out(r, c) = std::conj(a(c, r));
    return out;
}

// A * B^H
inline Mat3c mul_adjoint(const Mat3c& a, const Mat3c& b) {
    Mat3c out;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            cplx acc = 0.0;
            for (std::size_t k = 0; k < 3; ++k) acc += a(r, k) * std::conj(b(c, k));
            out(r, c) = acc;
        }
    return out;
}

// row vector d . M
inline Vec3c left_apply(const Vec3c& d, const Mat3c& m) {
    Vec3c out;
    for (std::size_t c = 0; c < 3; ++c)
        out[c] = d[0] * m(0, c) + d[1] * m(1, c) + d[2] * m(2, c);
    return out;
}

inline double max_abs(const Mat3c& a) {
    double mx = 0.0;
    for (const auto& e : a.m) mx = std::max(mx, std::abs(e));
    return mx;
}

// ---------------------------------------------------------------------------
// Quadrature

inline double trapezoid(const std::vector<double>& y, double dx) {
    if (y.size() < 2) return 0.0;
    double acc = 0.5 * (y.front() + y.back());
    for (std::size_t i = 1; i + 1 < y.size(); ++i) acc += y[i];
    return acc * dx;
}

namespace detail {

inline double quad_norm(double x) { return std::abs(x); }
inline double quad_norm(const cplx& x) { return std::abs(x); }
inline double quad_norm(const Mat3c& x) { return max_abs(x); }

template <class F, class T>
T simpson_step(F& f, double a, double fnorm_scale, double b, const T& fa, const T& fm,
               const T& fb, const T& whole, double abs_tol, double rel_tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const T flm = f(lm);
    const T frm = f(rm);
    const T left = ((b - a) / 12.0) * (fa + 4.0 * flm + fm);
    const T right = ((b - a) / 12.0) * (fm + 4.0 * frm + fb);
    const T sum = left + right;
    const double err = quad_norm(sum - whole);
    const double tol = std::max(abs_tol, rel_tol * std::max(fnorm_scale, quad_norm(sum)));
    if (err <= 15.0 * tol || depth <= 0) {
        if (depth <= 0 && err > 15.0 * tol)
            throw NumericalError("adaptive quadrature did not converge");
        return sum + (1.0 / 15.0) * (sum - whole);
    }
    return simpson_step(f, a, fnorm_scale, m, fa, flm, fm, left, 0.5 * abs_tol, rel_tol,
                        depth - 1) +
           simpson_step(f, m, fnorm_scale, b, fm, frm, fb, right, 0.5 * abs_tol, rel_tol,
                        depth - 1);
}

} // namespace detail

// Adaptive Simpson on [a, b]; T needs +, -, double*T. Tolerances follow the
// usual absolute/relative pair; throws NumericalError past the depth cap.
template <class F>
auto adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-9,
                      double rel_tol = 1e-8, int max_depth = 40) -> decltype(f(a)) {
    using T = decltype(f(a));
    if (a == b) return 0.0 * f(a);
    const T fa = f(a);
    const T fb = f(b);
    const T fm = f(0.5 * (a + b));
    const T whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, detail::quad_norm(whole), b, fa, fm, fb, whole,
                                abs_tol, rel_tol, max_depth);
}

// ---------------------------------------------------------------------------
// Dense linear solve (row-major, partial pivoting); sized for the 6x6 normal
// equations of the Lorentzian fitter.

inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-300)
            throw NumericalError("singular system in dense solve");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = rhs[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
        x[r] = acc / a[r * n + r];
    }
    return x;
}

} // namespace bimodal
