#include "hjblab/operator_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace hjb {

SymMat LinearCoefficients::diffusion(int dim, const Point& p) const {
    SymMat A;
    A.dim = dim;
    A.m11 = axx(p.x, p.y);
    if (dim == 2) {
        A.m22 = ayy ? ayy(p.x, p.y) : A.m11;
        A.m12 = axy ? axy(p.x, p.y) : 0.0;
    }
    return A;
}

Vec LinearCoefficients::drift(int dim, const Point& p) const {
    Vec b;
    b.dim = dim;
    b.x = bx ? bx(p.x, p.y) : 0.0;
    if (dim == 2) b.y = by ? by(p.x, p.y) : 0.0;
    return b;
}

void ControlledOperator::validate() const {
    if (controls.empty()) throw std::invalid_argument("operator has no controls");
    if (dim != 1 && dim != 2) throw std::invalid_argument("operator dimension must be 1 or 2");
    if (!(lambda > 0.0) || !(lambda <= Lambda))
        throw std::invalid_argument("ellipticity constants must satisfy 0 < lambda <= Lambda");
    if (gamma < 0.0 || delta < 0.0)
        throw std::invalid_argument("gamma and delta must be nonnegative");
    for (const auto& ctrl : controls)
        if (!ctrl.axx || !ctrl.c || !ctrl.f)
            throw std::invalid_argument("control is missing a coefficient field");
}

double normalize_inhomogeneity(const ControlledOperator& op, const Point& p) {
    double fmin = std::numeric_limits<double>::infinity();
    for (const auto& ctrl : op.controls) fmin = std::min(fmin, ctrl.f(p.x, p.y));
    return fmin;
}

double eval_F(const ControlledOperator& op, const PointState& s) {
    if (s.dim() != op.dim || s.p.dim != op.dim)
        throw std::invalid_argument("point state dimension does not match operator");
    double best = -std::numeric_limits<double>::infinity();
    double fmin = std::numeric_limits<double>::infinity();
    for (const auto& ctrl : op.controls) {
        const SymMat A = ctrl.diffusion(op.dim, s.pos);
        const Vec b = ctrl.drift(op.dim, s.pos);
        const double c = ctrl.c(s.pos.x, s.pos.y);
        const double f = ctrl.f(s.pos.x, s.pos.y);
        double tr = A.m11 * s.M.m11;
        if (op.dim == 2) tr += A.m22 * s.M.m22 + 2.0 * A.m12 * s.M.m12;
        best = std::max(best, tr + b.dot(s.p) + c * s.u - f);
        fmin = std::min(fmin, f);
    }
    return best + fmin;
}

ControlledOperator asymptotic_operator(const ControlledOperator& op) {
    ControlledOperator out = op;
    for (auto& ctrl : out.controls) ctrl.f = constant_field(0.0);
    out.a0 = 0.0;
    return out;
}

double pucci_extremal(double lambda, double Lambda, Sign sign, const SymMat& M) {
    if (!(lambda > 0.0) || !(lambda <= Lambda))
        throw std::invalid_argument("pucci_extremal requires 0 < lambda <= Lambda");
    const auto eig = M.eigenvalues();
    double pos = 0.0, neg = 0.0;
    const int n = M.dim == 1 ? 1 : 2;
    for (int i = 0; i < n; ++i) {
        pos += std::max(eig[i], 0.0);
        neg += std::min(eig[i], 0.0);
    }
    return sign == Sign::plus ? Lambda * pos + lambda * neg
                              : lambda * pos + Lambda * neg;
}

double lipschitz_envelope(double lambda, double Lambda, double gamma, double delta,
                          Sign sign, const PointState& s) {
    const double m = pucci_extremal(lambda, Lambda, sign, s.M);
    const double sgn = sign == Sign::plus ? 1.0 : -1.0;
    return m + sgn * gamma * s.p.norm() + sgn * delta * std::abs(s.u);
}

namespace {

LinearCoefficients make_constant_control(int dim, double axx, double ayy, double bx, double by,
                                         double c, double f) {
    LinearCoefficients ctrl;
    ctrl.axx = constant_field(axx);
    ctrl.ayy = constant_field(dim == 2 ? ayy : 0.0);
    ctrl.axy = constant_field(0.0);
    ctrl.bx = constant_field(bx);
    ctrl.by = constant_field(dim == 2 ? by : 0.0);
    ctrl.c = constant_field(c);
    ctrl.f = constant_field(f);
    return ctrl;
}

} // namespace

ControlledOperator fucik_operator(double a, double b, int dim) {
    if (a > b) throw std::invalid_argument("fucik_operator requires a <= b");
    ControlledOperator op;
    op.dim = dim;
    op.controls.push_back(make_constant_control(dim, 1.0, 1.0, 0.0, 0.0, a, 0.0));
    op.controls.push_back(make_constant_control(dim, 1.0, 1.0, 0.0, 0.0, b, 0.0));
    op.lambda = 1.0;
    op.Lambda = 1.0;
    op.gamma = 0.0;
    op.delta = std::max(std::abs(a), std::abs(b));
    op.a0 = 0.0;
    return op;
}

ControlledOperator pucci_plus_operator(double lambda, double Lambda, double gamma, int dim) {
    if (!(lambda > 0.0) || !(lambda <= Lambda))
        throw std::invalid_argument("pucci_plus_operator requires 0 < lambda <= Lambda");
    ControlledOperator op;
    op.dim = dim;
    const std::vector<double> diffs = lambda == Lambda
                                          ? std::vector<double>{lambda}
                                          : std::vector<double>{lambda, Lambda};
    const std::vector<double> drifts = gamma == 0.0
                                           ? std::vector<double>{0.0}
                                           : std::vector<double>{-gamma, 0.0, gamma};
    if (dim == 1) {
        for (double a : diffs)
            for (double bx : drifts)
                op.controls.push_back(make_constant_control(1, a, 0.0, bx, 0.0, 0.0, 0.0));
    } else {
        for (double a1 : diffs)
            for (double a2 : diffs)
                for (double bx : drifts)
                    for (double by : drifts)
                        op.controls.push_back(
                            make_constant_control(2, a1, a2, bx, by, 0.0, 0.0));
    }
    op.lambda = lambda;
    op.Lambda = Lambda;
    // corner drifts (+-gamma per axis) have Euclidean norm gamma*sqrt(dim)
    op.gamma = gamma * std::sqrt(static_cast<double>(dim));
    op.delta = 0.0;
    op.a0 = 0.0;
    return op;
}

ControlledOperator linear_operator(double a, double c0, int dim) {
    if (!(a > 0.0)) throw std::invalid_argument("linear_operator requires a > 0");
    ControlledOperator op;
    op.dim = dim;
    op.controls.push_back(make_constant_control(dim, a, a, 0.0, 0.0, c0, 0.0));
    op.lambda = a;
    op.Lambda = a;
    op.gamma = 0.0;
    op.delta = std::abs(c0);
    op.a0 = 0.0;
    return op;
}

ControlledOperator plateau_operator(double a, double slope_mid, double b, double plateau_len,
                                    int dim) {
    if (!(a <= slope_mid && slope_mid <= b))
        throw std::invalid_argument("plateau_operator requires a <= slope_mid <= b");
    if (!(plateau_len > 0.0)) throw std::invalid_argument("plateau length must be positive");
    ControlledOperator op;
    op.dim = dim;
    op.controls.push_back(make_constant_control(dim, 1.0, 1.0, 0.0, 0.0, a, 0.0));
    op.controls.push_back(make_constant_control(dim, 1.0, 1.0, 0.0, 0.0, slope_mid, 0.0));
    op.controls.push_back(make_constant_control(dim, 1.0, 1.0, 0.0, 0.0, b,
                                                (b - slope_mid) * plateau_len));
    op.lambda = 1.0;
    op.Lambda = 1.0;
    op.gamma = 0.0;
    op.delta = std::max({std::abs(a), std::abs(slope_mid), std::abs(b)});
    op.a0 = 2.0 * (b - slope_mid) * plateau_len;
    return op;
}

double StructureReport::max_violation() const {
    return std::max({h1_violation, convexity_violation, homogeneity_violation, dfinf_violation,
                     u_sandwich_violation});
}

StructureReport check_structure(const ControlledOperator& op, const Point& lo, const Point& hi,
                                int samples, std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("check_structure requires samples >= 1");
    op.validate();
    const ControlledOperator op_inf = asymptotic_operator(op);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> ux(lo.x, hi.x);
    std::uniform_real_distribution<double> uy(lo.y, hi.y);

    auto random_state = [&](const Point& pos) {
        PointState s;
        s.M.dim = op.dim;
        s.M.m11 = unit(rng);
        if (op.dim == 2) {
            s.M.m22 = unit(rng);
            s.M.m12 = unit(rng);
        }
        s.p.dim = op.dim;
        s.p.x = unit(rng);
        if (op.dim == 2) s.p.y = unit(rng);
        s.u = unit(rng);
        s.pos = pos;
        return s;
    };

    StructureReport rep;
    const double alphas[] = {0.25, 0.5, 0.75};
    const double hom_ts[] = {0.5, 2.0, 10.0};
    for (int k = 0; k < samples; ++k) {
        Point pos{ux(rng), op.dim == 2 ? uy(rng) : 0.0};
        const PointState s1 = random_state(pos);
        const PointState s2 = random_state(pos);
        const double F1 = eval_F(op, s1);
        const double F2 = eval_F(op, s2);
        const PointState diff = s1 - s2;

        // H1 sandwich
        const double lower = lipschitz_envelope(op.lambda, op.Lambda, op.gamma, op.delta,
                                                Sign::minus, diff);
        const double upper = lipschitz_envelope(op.lambda, op.Lambda, op.gamma, op.delta,
                                                Sign::plus, diff);
        rep.h1_violation = std::max({rep.h1_violation, lower - (F1 - F2), (F1 - F2) - upper});

        // convexity C(F)
        for (double al : alphas) {
            PointState mid = s1.scaled(al) + s2.scaled(1.0 - al);
            const double lhs = eval_F(op, mid);
            rep.convexity_violation =
                std::max(rep.convexity_violation, lhs - (al * F1 + (1.0 - al) * F2));
        }

        // H0 for F_inf
        const double Finf1 = eval_F(op_inf, s1);
        for (double t : hom_ts) {
            const double lhs = eval_F(op_inf, s1.scaled(t));
            rep.homogeneity_violation =
                std::max(rep.homogeneity_violation, std::abs(lhs - t * Finf1));
        }

        // D_{F_inf}(F): F(s1+s2) - F(s1) <= F_inf(s2)
        const double Fsum = eval_F(op, s1 + s2);
        const double Finf2 = eval_F(op_inf, s2);
        rep.dfinf_violation = std::max(rep.dfinf_violation, Fsum - F1 - Finf2);

        // U_{F_inf}(F): F_inf - a0 <= F <= F_inf
        const double a0 = op.a0 >= 0.0 ? op.a0 : 0.0;
        rep.u_sandwich_violation =
            std::max({rep.u_sandwich_violation, F1 - Finf1, Finf1 - a0 - F1});

        // H2 probe on F_inf(., 0, 0, .): spatial modulus at a small step
        rep.h2_step = 1e-4 * std::max(hi.x - lo.x, op.dim == 2 ? hi.y - lo.y : 0.0);
        PointState s0 = s1;
        s0.p = Vec::zero(op.dim);
        s0.u = 0.0;
        PointState s0_near = s0;
        s0_near.pos.x = std::min(s0.pos.x + rep.h2_step, hi.x);
        if (op.dim == 2) s0_near.pos.y = std::min(s0.pos.y + rep.h2_step, hi.y);
        rep.h2_modulus = std::max(rep.h2_modulus,
                                  std::abs(eval_F(op_inf, s0) - eval_F(op_inf, s0_near)));
    }
    return rep;
}

} // namespace hjb
