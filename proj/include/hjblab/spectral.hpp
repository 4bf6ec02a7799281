#pragma once

#include "hjblab/solvers.hpp"

#include <optional>
#include <utility>

namespace hjb {

/// Principal half-eigenvalue estimate with Collatz-Wielandt brackets.
/// Conventions follow F_h[phi] + lambda*phi = 0 with phi one-signed and
/// ||phi||_inf = 1.
struct EigenPair {
    double lambda = 0.0;
    Field phi;
    Sign sign = Sign::plus;
    double bracket_lo = 0.0;  // min over nodes of -F_h[phi]/phi
    double bracket_hi = 0.0;
    int iterations = 0;
    double residual = 0.0;    // ||F_h[phi] + lambda*phi||_inf
    double hopf_c0 = 0.0;     // measured inf |phi|/d
    double hopf_C0 = 0.0;     // measured sup |phi|/d
};

/// Nonlinear inverse power iteration for the principal half-eigenvalue of a
/// positively homogeneous discrete HJB operator (all sources must vanish).
/// The inner solve uses the fixed shift sigma = -delta - 1, proper by H1
/// since lambda_1 >= -delta; per-iterate Collatz-Wielandt ratios
/// -F_h[v]/v (taken where |v| > 1e-8 ||v||_inf) bracket the discrete
/// eigenvalue, and iteration stops when the bracket width drops below tol.
/// An iterate acquiring the wrong sign lowers sigma and restarts; a bracket
/// that fails to shrink within the cap throws std::runtime_error. The start
/// vector defaults to sign * distance_field; any one-signed start of the
/// right sign may be supplied instead (the result is scale-invariant).
EigenPair principal_half_eigen(const DiscreteHJB& d, Sign sign, double tol,
                               const SolverParams& prm,
                               const Eigen::VectorXd* start = nullptr);

/// Constructive lower bound on lambda_1^+ from an approximate positive
/// supersolution: given w with F_h[w] <= eps, eps >= 0, ||w^-||_inf <=
/// ||eps||_p, rebuilds the certificate chain (solve L_0^+[psi] = -eps/||eps||_p,
/// C1 = sup psi/(w/m0 + ||eps/m0||_p), bound = -C1*delta*||eps/m0||_p) and
/// re-verifies it nodewise before returning. Returns nothing when the
/// preconditions or the nodewise chain fail.
std::optional<double> eigen_lower_bound_certificate(const DiscreteHJB& d, const Field& w,
                                                    const Field& eps, const SolverParams& prm);

/// lambda_1^+ on the full grid versus the grid with `gamma` excised;
/// excising positive measure strictly raises the eigenvalue.
std::pair<EigenPair, EigenPair> domain_monotonicity_gap(const ControlledOperator& op,
                                                        const GridPtr& grid,
                                                        const HoleShape& gamma, double tol,
                                                        const SolverParams& prm);

/// (inf, sup) over interior nodes of |phi|/d; phi must be one-signed.
std::pair<double, double> hopf_ratio(const Field& phi, const Field& dist);

} // namespace hjb
