#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace hjb {

/// Point in the domain; y is ignored for 1D problems.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Symmetric matrix of dimension 1 or 2 (Hessian values, diffusion values).
struct SymMat {
    int dim = 1;
    double m11 = 0.0;
    double m22 = 0.0;
    double m12 = 0.0;

    static SymMat zero(int dim) { return SymMat{dim, 0.0, 0.0, 0.0}; }
    static SymMat diag(double d1) { return SymMat{1, d1, 0.0, 0.0}; }
    static SymMat diag(double d1, double d2) { return SymMat{2, d1, d2, 0.0}; }

    double trace() const { return dim == 1 ? m11 : m11 + m22; }

    /// Eigenvalues in closed form; {lo, hi} (equal entries for dim 1).
    std::array<double, 2> eigenvalues() const {
        if (dim == 1) return {m11, m11};
        const double mean = 0.5 * (m11 + m22);
        const double r = std::sqrt(0.25 * (m11 - m22) * (m11 - m22) + m12 * m12);
        return {mean - r, mean + r};
    }

    SymMat operator-() const { return SymMat{dim, -m11, -m22, -m12}; }
    SymMat operator*(double t) const { return SymMat{dim, t * m11, t * m22, t * m12}; }
    SymMat operator+(const SymMat& o) const { return SymMat{dim, m11 + o.m11, m22 + o.m22, m12 + o.m12}; }
    SymMat operator-(const SymMat& o) const { return SymMat{dim, m11 - o.m11, m22 - o.m22, m12 - o.m12}; }
};

/// Gradient / drift vector of dimension 1 or 2.
struct Vec {
    int dim = 1;
    double x = 0.0;
    double y = 0.0;

    static Vec zero(int dim) { return Vec{dim, 0.0, 0.0}; }

    double norm() const { return dim == 1 ? std::abs(x) : std::hypot(x, y); }
    double dot(const Vec& o) const { return dim == 1 ? x * o.x : x * o.x + y * o.y; }

    Vec operator-() const { return Vec{dim, -x, -y}; }
    Vec operator*(double t) const { return Vec{dim, t * x, t * y}; }
    Vec operator+(const Vec& o) const { return Vec{dim, x + o.x, y + o.y}; }
    Vec operator-(const Vec& o) const { return Vec{dim, x - o.x, y - o.y}; }
};

/// The tuple (M, p, u, x) an elliptic operator acts on.
struct PointState {
    SymMat M;
    Vec p;
    double u = 0.0;
    Point pos;

    int dim() const { return M.dim; }

    PointState scaled(double t) const { return PointState{M * t, p * t, t * u, pos}; }
};

inline PointState operator+(const PointState& a, const PointState& b) {
    return PointState{a.M + b.M, a.p + b.p, a.u + b.u, a.pos};
}

inline PointState operator-(const PointState& a, const PointState& b) {
    return PointState{a.M - b.M, a.p - b.p, a.u - b.u, a.pos};
}

enum class Sign { plus, minus };

inline int sign_value(Sign s) { return s == Sign::plus ? +1 : -1; }

} // namespace hjb
