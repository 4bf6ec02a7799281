#pragma once

#include "hjblab/spectral.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace hjb {

/// Knobs of the multiplicity machinery. C_cal and T0_cal are the
/// non-explicit constants of the a-priori bound and the t* bracket; they are
/// calibrated once on a designated suite and frozen (see calibrate_constants).
struct APParams {
    double C_cal = 1.5;        // constant in the a-priori solution bound
    double T0_cal = 8.0;       // constant in the t* upper bracket T0*||h^-||_p
    double tstar_tol = 1e-3;   // bisection tolerance in t
    double eigen_tol = 1e-6;   // half-eigenvalue bracket width
    double cluster_radius = 1e-4;   // sup-norm dedup radius after polishing
    double colinear_tol = 1e-6;     // max deviation of the segment fit
    double subsol_margin = 1.0;     // slack built into subsolutions
    double blowup_safety = 10.0;    // divergence cutoff multiple of the bound
};

/// Everything the multiplicity experiments share for one (operator, grid, h):
/// the scheme, its homogeneous skeleton, both principal half-eigenpairs of
/// the skeleton, and the asymptotic branch profiles w* = -phi/lambda_1^+ and
/// w_* (the nonpositive solution of F_inf[w] = phi).
struct APContext {
    DiscreteHJB d;
    DiscreteHJB d_inf;
    EigenPair plus;
    EigenPair minus;
    Field phi;        // positive eigenfunction, ||phi||_inf = 1
    Field h;
    Field w_upper;    // only when lambda_1^+ < 0 < lambda_1^-
    Field w_lower;
    APParams ap;
    SolverParams prm;

    bool opposite_signs() const { return plus.lambda < 0.0 && minus.lambda > 0.0; }
};

APContext make_ap_context(const ControlledOperator& op, const GridPtr& grid, const Field& h,
                          const APParams& ap, const SolverParams& prm);

/// Same spectral data, new right-hand side decomposition.
APContext with_right_hand_side(const APContext& ctx, const Field& h);

/// The explicit bound C_cal*(1 - 1/l1p)*(1 + 1/l1m)*(a0 + g_norm) on
/// solution sup-norms; also the source of the Perron divergence cutoff.
/// Requires l1p < 0 < l1m.
double apriori_bound(double l1p, double l1m, double a0, double g_norm, double C_cal);

enum class Solvability { solvable, no_solution, inconclusive };

std::string to_string(Solvability s);

struct SolvabilityVerdict {
    Solvability status = Solvability::inconclusive;
    Field witness;              // populated when solvable
    int iterations = 0;
    double final_residual = 0.0;
    double blowup_cutoff = 0.0;
};

/// Monotone Perron run from the global subsolution for (P_t). Convergence
/// certifies solvability with the limit as witness; monotone iterates
/// passing the divergence cutoff (blowup_safety times the a-priori bound,
/// plus the start amplitude) certify non-existence; hitting the iteration
/// cap is inconclusive.
SolvabilityVerdict solvable(const APContext& ctx, double t);

struct TStarResult {
    double t_star = 0.0;
    std::pair<double, double> initial_bracket{0.0, 0.0};
    std::vector<std::pair<double, double>> bracket_history;
    std::map<double, Solvability> verdicts;
    int inconclusive_count = 0;
};

/// Bisection for the critical height. The initial bracket is
/// [-C_cal-bound(a0 + ||h||_p) - 10 tol, T0*||h^-||_p + 1]; endpoints are
/// verified to carry NO_SOLUTION / SOLVABLE and
/// widened a bounded number of times if the calibration is inadequate.
/// Verdicts along the transcript must switch exactly once (asserted).
/// Requires lambda_1^+ < 0 < lambda_1^-.
TStarResult find_tstar(const APContext& ctx, double tol);

struct BranchPoint {
    double t = 0.0;
    Field u_low;
    Field u_up;
    double residual_low = 0.0;
    double residual_up = 0.0;
    bool complete = false;
};

/// Lower branch by monotone Perron from a shared interval subsolution,
/// upper branch by damped Newton seeded at t*w_upper with continuation and a
/// census fallback. Every sample must satisfy t > t* + tol.
std::vector<BranchPoint> trace_branches(const APContext& ctx, std::vector<double> t_samples);

struct Census {
    std::vector<Field> solutions;   // deduplicated, sorted increasingly
    bool ordered = false;           // every pair nodewise comparable
    bool colinear_segment = false;  // >= 3 clusters passing the segment fit
    double max_colinear_dev = 0.0;
    double min_pair_gap = 0.0;      // merge-distance diagnostic
    int attempts = 0;
    int converged_runs = 0;
};

/// Multi-start census of (P_t): Newton polished to polish_tol from the
/// subsolution, the supersolution, asymptotic-ray and eigenfunction-ray
/// ladders, seeded random smooth fields, then midpoints of found pairs.
/// Solutions are clustered at cluster_radius and checked pairwise for
/// ordering; with >= 3 clusters the colinearity fit is reported.
Census count_solutions(const APContext& ctx, double t, int n_starts, std::uint64_t seed);

/// (||u_low/t - w_*||_inf, ||u_up/t - w*||_inf) at one large t.
std::pair<double, double> asymptotic_slopes(const APContext& ctx, double t_large);

/// For each perturbation h_k = h + p_k returns (||p_k||_p, |t*(h_k) - t*(h)|).
std::vector<std::pair<double, double>> tstar_continuity_probe(
    const APContext& ctx, const std::vector<Field>& perturbations);

struct CalibrationProblem {
    ControlledOperator op;
    GridPtr grid;
    Field h;
    std::vector<double> t_offsets;  // branch samples at t* + offset
};

struct CalibrationReport {
    double C0_raw = 0.0;      // max measured ||u||_inf ratio, margin excluded
    double T0_raw = 0.0;      // max measured t*/||h^-||_p and delta*C1/c0 chain value
    double C0 = 0.0;          // frozen constants (raw * margin)
    double T0 = 0.0;
    std::vector<double> solution_ratios;
    std::vector<double> tstar_ratios;
};

/// Measures the non-explicit constants on a designated suite. margin
/// inflates the raw maxima before freezing.
CalibrationReport calibrate_constants(const std::vector<CalibrationProblem>& suite,
                                      const APParams& ap, const SolverParams& prm,
                                      double margin = 1.5);

} // namespace hjb
