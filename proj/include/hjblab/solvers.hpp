#pragma once

#include "hjblab/discretize.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hjb {

struct SolverParams {
    double tol = 1e-8;              // sup-norm residual target
    double shift_offset = 1.0;      // properness shift = delta + shift_offset
    int howard_cap = 100;
    int perron_cap = 10000;
    int newton_cap = 200;
    double newton_damping = 1.0;    // initial trial step, halved on residual increase
    double newton_damping_floor = 1.0 / 64.0;
    double newton_blowup = 1e8;
    double lp_exponent = 4.0;       // discrete L^p norms (p > dimension)
    double polish_tol = 1e-10;      // census residual polish target

    double proper_shift(const DiscreteHJB& d) const { return d.delta + shift_offset; }

    /// Residual targets scale with the data amplitude: an absolute 1e-8 on
    /// O(10^3) fields sits below the rounding floor of the stencil apply.
    double residual_target(double g_sup) const { return tol * std::max(1.0, g_sup); }
};

enum class SolveStatus { converged, diverged, iteration_cap, policy_cycle };

std::string to_string(SolveStatus s);

struct SolveReport {
    Eigen::VectorXd solution;
    int iterations = 0;
    double final_residual = 0.0;
    SolveStatus status = SolveStatus::converged;

    bool ok() const { return status == SolveStatus::converged; }
};

/// Howard policy iteration for the proper problem
///     max_alpha(L_alpha u - f_alpha) + f_min - shift*u = g.
/// Alternates argmax control selection (lowest index wins ties) with sparse
/// direct solves of the frozen-policy system; terminates exactly when the
/// policy repeats or the residual is below tol. shift > delta makes every
/// frozen matrix strictly diagonally dominant. Throws std::runtime_error if
/// a frozen matrix is singular.
SolveReport solve_proper(const DiscreteHJB& d, const Eigen::VectorXd& g, double shift,
                         const SolverParams& prm,
                         const std::optional<std::vector<int>>& initial_policy = std::nullopt);

/// Monotone hierarchy u_{m+1} = (F_h - shift)^{-1}(g - shift*u_m) starting
/// from a discrete subsolution u0 (apply_Fh(u0) >= g - tol nodewise; checked,
/// violations throw std::invalid_argument). Iterates are nodewise
/// nondecreasing (asserted every step; a decrease signals a non-monotone
/// assembly bug and throws std::logic_error). Stops when the residual is
/// below tol (converged), the sup-norm exceeds blowup (diverged), or after
/// cap iterations.
SolveReport perron_iterate(const DiscreteHJB& d, const Eigen::VectorXd& g,
                           const Eigen::VectorXd& u0, double shift, int cap, double blowup,
                           const SolverParams& prm);

/// Mirror image of perron_iterate: starts from a discrete supersolution and
/// produces nodewise nonincreasing iterates, converging to the maximal
/// solution below u0 when one exists.
SolveReport perron_iterate_downward(const DiscreteHJB& d, const Eigen::VectorXd& g,
                                    const Eigen::VectorXd& u0, double shift, int cap,
                                    double blowup, const SolverParams& prm);

/// Nonnegative supersolution of F_h[u] = h + t*phi built from the extremal
/// problem M^+_{lambda,Lambda}(D^2 v) + gamma|Dv| = -h^-. `valid` reports the
/// a-posteriori check apply_Fh(vbar) <= h + t*phi; when it fails,
/// `min_admissible_t` carries the smallest t for which this vbar works.
struct SupersolutionResult {
    Field vbar;
    bool valid = false;
    double min_admissible_t = 0.0;
    double sup_v_over_d = 0.0;  // measured C1 = sup vbar/d
};

SupersolutionResult build_supersolution(const DiscreteHJB& d, const Field& h, double t,
                                        const Field& phi, const SolverParams& prm);

/// Strictly negative subsolution of F_h[u] = h + t*phi valid for every
/// t in [t_lo, t_hi], lying below every solution in that range:
/// solves F_inf[v] = M + h^+ with M = a0 + max_I ||t phi||_inf +
/// delta*C1_bound + margin, where C1_bound is an a-priori sup-norm bound on
/// solutions over the interval. The subsolution property is re-verified with
/// slack >= margin before returning.
Field build_subsolution(const DiscreteHJB& d, const Field& h, double t_lo, double t_hi,
                        double margin, double C1_bound, const Field& phi,
                        const SolverParams& prm);

/// Damped policy-iteration-as-Newton for the (possibly non-proper) system
/// F_h[u] = g. Freezes the argmax controls, solves the linearized system,
/// and damps the update (initial step `damping`, halved on residual
/// increase, floored at 1/64). No global convergence claim; throws
/// std::runtime_error on a singular linearization so callers can retry
/// from another start.
SolveReport semismooth_newton(const DiscreteHJB& d, const Eigen::VectorXd& g,
                              const Eigen::VectorXd& u0, double damping,
                              const SolverParams& prm);

/// Frozen-policy matrix sum_rows L_{policy[k]} - shift*I (column-major for
/// direct factorization).
Eigen::SparseMatrix<double> assemble_policy_matrix(const DiscreteHJB& d,
                                                   const std::vector<int>& policy, double shift);

} // namespace hjb
