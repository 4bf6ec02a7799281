#pragma once

#include "hjblab/expression.hpp"
#include "hjblab/types.hpp"

#include <cstdint>
#include <vector>

namespace hjb {

/// Coefficient fields of one linear elliptic operator
///     L u = tr(A(x) D^2 u) + b(x).Du + c(x) u - f(x).
/// A is symmetric with eigenvalues in [lambda, Lambda] of the owning
/// operator; |b| <= gamma, |c| <= delta. Units: A dimensionless, b 1/length,
/// c and f 1/length^2.
struct LinearCoefficients {
    ScalarField axx;
    ScalarField ayy;  // ignored in 1D
    ScalarField axy;  // off-diagonal diffusion; must vanish for 2D assembly
    ScalarField bx;
    ScalarField by;   // ignored in 1D
    ScalarField c;
    ScalarField f;

    SymMat diffusion(int dim, const Point& p) const;
    Vec drift(int dim, const Point& p) const;
};

/// HJB operator F = sup over a finite control family of linear operators,
/// normalized so that F(0,0,0,x) = 0 (the min of f over controls is folded
/// back; see normalize_inhomogeneity).
struct ControlledOperator {
    int dim = 1;
    std::vector<LinearCoefficients> controls;
    double lambda = 1.0;   // ellipticity floor
    double Lambda = 1.0;   // ellipticity ceiling
    double gamma = 0.0;    // sup |b|
    double delta = 0.0;    // sup |c|
    double a0 = 0.0;       // >= 2 sup_alpha ||f_alpha||_inf; <0 means "measure at discretization"

    void validate() const;  // throws std::invalid_argument on bad structure constants
};

/// The folded-back inhomogeneity min_alpha f_alpha(x); the right-hand side
/// that restores the un-normalized sup_alpha(L_alpha u) = 0 form.
double normalize_inhomogeneity(const ControlledOperator& op, const Point& p);

/// Evaluates the normalized operator at a point state:
///   max_alpha [tr(A M) + b.p + c u - f] + min_alpha f.
/// Throws std::invalid_argument on dimension mismatch.
double eval_F(const ControlledOperator& op, const PointState& s);

/// The positively 1-homogeneous asymptotic operator F_inf = sup_t F(t.)/t:
/// every f_alpha set to zero, a0 = 0. Idempotent.
ControlledOperator asymptotic_operator(const ControlledOperator& op);

/// Pucci extremal operator M^+/- over symmetric A with spectrum in
/// [lambda, Lambda]:
///   M^+(M) = Lambda * (sum of positive eigenvalues) + lambda * (sum of negative),
///   M^-(M) = lambda * (sum of positive) + Lambda * (sum of negative).
double pucci_extremal(double lambda, double Lambda, Sign sign, const SymMat& M);

/// Lipschitz envelope L^{+/-}(M,p,u) = M^{+/-}(M) +/- gamma|p| +/- delta|u|
/// from the H1 structure condition.
double lipschitz_envelope(double lambda, double Lambda, double gamma, double delta,
                          Sign sign, const PointState& s);

/// Two-control operator {Tr(M) + a u, Tr(M) + b u}; the sup equals
/// Tr(M) - a u^- + b u^+. Requires a <= b.
ControlledOperator fucik_operator(double a, double b, int dim = 1);

/// Operator whose sup realizes M^+_{lambda,Lambda}(D^2 u) + gamma |Du| on
/// diagonal Hessians: controls enumerate axis diffusions in {lambda, Lambda}
/// and axis drifts in {-gamma, 0, +gamma}.
ControlledOperator pucci_plus_operator(double lambda, double Lambda, double gamma, int dim);

/// Single-control linear operator a*Tr(M) + c0*u.
ControlledOperator linear_operator(double a, double c0, int dim = 1);

/// Piecewise-linear semilinear operator Tr(M) + f(u) whose f has slope a for
/// u<0, exactly `slope_mid` on (0, plateau_len), and b beyond: three controls
/// {Tr+au, Tr+slope_mid*u, Tr+bu - (b-slope_mid)*plateau_len}. With
/// slope_mid equal to the principal eigenvalue this produces a segment of
/// solutions.
ControlledOperator plateau_operator(double a, double slope_mid, double b, double plateau_len,
                                    int dim = 1);

/// Sampling-based verification of the structural hypotheses; max violations
/// are reported, never thrown.
struct StructureReport {
    double h1_violation = 0.0;          // sandwich L^- <= F(s1)-F(s2) <= L^+
    double convexity_violation = 0.0;   // C(F)
    double homogeneity_violation = 0.0; // H0(F_inf)
    double dfinf_violation = 0.0;       // F(s1+s2)-F(s1) <= F_inf(s2)
    double u_sandwich_violation = 0.0;  // F_inf - a0 <= F <= F_inf
    // H2 probe: max |F_inf(M,0,0,x) - F_inf(M,0,0,y)| over sampled pairs with
    // |x-y| <= h2_step. Sampling can flag a discontinuity but cannot certify
    // continuity (table-defined coefficients especially), so this is reported
    // and never folded into max_violation.
    double h2_modulus = 0.0;
    double h2_step = 0.0;

    double max_violation() const;
};

/// Evaluates the hypotheses on `samples` random state pairs drawn inside the
/// box [lo, hi] with a fixed seed; states have O(1) magnitude so absolute
/// violation thresholds near 1e-12 are meaningful.
StructureReport check_structure(const ControlledOperator& op, const Point& lo, const Point& hi,
                                int samples, std::uint64_t seed = 20240901ull);

} // namespace hjb
